#![allow(dead_code)]

pub mod oracles;

use godice::approximator::Mlp;
use godice::demo::{generate_dataset, Annotate, Dataset, GenerateConfig, Source, TransitionBatch};
use godice::env::{LabelScheme, TaskSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_config(seed: u64) -> GenerateConfig {
    GenerateConfig {
        n_expert: 4,
        n_noisy: 4,
        n_random: 2,
        noise: 0.3,
        seed,
        annotate: Annotate::None,
        scheme: LabelScheme::E3,
    }
}

/// A small dataset whose trajectories all carry random decoded labels in `0..k`.
pub fn labeled_dataset(n_objects: usize, k: usize, seed: u64) -> Dataset {
    let spec = TaskSpec::grid_pnp(n_objects);
    let mut data = generate_dataset(&spec, &small_config(seed)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for id in data.unannotated_ids() {
        let len = data.trajectory(id).unwrap().len();
        let labels = (0..len).map(|_| rng.gen_range(0..k)).collect();
        data.set_decoded_labels(id, labels).unwrap();
    }
    data
}

/// An offline batch with at least one terminal transition.
pub fn offline_batch(data: &Dataset, size: usize, k: usize, seed: u64) -> TransitionBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = data.sample_batch(Source::Offline, size, k, &mut rng).unwrap();
    if !b.terminal.iter().any(|&t| t) {
        b.terminal[0] = true;
    }
    b
}

/// Relative error with a small floor, so that near-zero gradients compare
/// on an absolute scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compares `grad` with central differences of `f` on `n` random coordinates
/// and returns the worst relative error.
pub fn check_grad<F: Fn(&Mlp) -> f64>(net: &Mlp, grad: &Mlp, n: usize, seed: u64, f: F) -> f64 {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let i = rng.gen_range(0..net.num_params());
        let mut plus = net.clone();
        plus.params_mut()[i] += h;
        let mut minus = net.clone();
        minus.params_mut()[i] -= h;
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        worst = worst.max(rel_err(grad.params()[i], fd));
    }
    worst
}
