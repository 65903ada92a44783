//! Checks shared by the focused test files and the acceptance runner. Each
//! returns the measured error so callers can apply their own thresholds.

use godice::approximator::{Adam, Matrix, Mlp};
use godice::demo::{Source, TransitionBatch};
use godice::godice::{
    advantage, critic_loss, decode_tables, disc_inputs, discriminator_loss, policy_loss, Encoder,
    HierarchicalPolicy, ViterbiTables,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_grad, labeled_dataset, offline_batch, rel_err};

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Worst relative error of every layer of a deep net (`per_layer` random
/// coordinates each) and of its input gradient (all entries).
pub fn layer_gradient_errors(per_layer: usize) -> (Vec<f64>, f64) {
    let sizes = [7, 16, 12, 9, 4];
    let net = Mlp::new(&sizes, 11).unwrap();
    let x = random_matrix(10, 7, 12);
    let up = random_matrix(10, 4, 13);
    let loss = |n: &Mlp, x: &Matrix| {
        let y = n.forward_batch(x).unwrap();
        y.as_slice().iter().zip(up.as_slice()).map(|(a, b)| a * b).sum::<f64>()
    };
    let tape = net.record(&x).unwrap();
    let (grad, gx) = net.backward_with_input(&tape, &up).unwrap();
    let h = 1e-5;

    let mut layers = Vec::new();
    let mut offset = 0;
    for l in 0..sizes.len() - 1 {
        let count = sizes[l] * sizes[l + 1] + sizes[l + 1];
        let mut rng = ChaCha8Rng::seed_from_u64(l as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..per_layer {
            let i = offset + rng.gen_range(0..count);
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let mut m = net.clone();
            m.params_mut()[i] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            worst = worst.max(rel_err(grad.params()[i], fd));
        }
        layers.push(worst);
        offset += count;
    }

    let mut input: f64 = 0.0;
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            let mut xp = x.clone();
            xp.row_mut(r)[c] += h;
            let mut xm = x.clone();
            xm.row_mut(r)[c] -= h;
            let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
            input = input.max(rel_err(gx.get(r, c), fd));
        }
    }
    (layers, input)
}

pub fn penalty_gradient_error(coords: usize) -> f64 {
    let net = Mlp::new(&[6, 10, 10, 1], 21).unwrap();
    let x = random_matrix(8, 6, 22);
    let mask = [true, false, true, true, false, true];
    let value = |n: &Mlp| {
        let t = n.record(&x).unwrap();
        n.input_grad_penalty(&t, &mask, 3.0).unwrap().0
    };
    let tape = net.record(&x).unwrap();
    let (_, grad) = net.input_grad_penalty(&tape, &mask, 3.0).unwrap();
    check_grad(&net, &grad, coords, 23, value)
}

pub fn discriminator_gradient_error(coords: usize, gp: f64) -> f64 {
    let k = 3;
    let data = labeled_dataset(2, k, 31);
    let enc = Encoder::new(k, data.spec.state_dim(), data.spec.goal_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let eb = data.sample_batch(Source::Expert, 24, k, &mut rng).unwrap();
    let ob = offline_batch(&data, 24, k, 33);
    let (xe, we) = disc_inputs(&enc, &eb, 0.99);
    let (xo, wo) = disc_inputs(&enc, &ob, 0.99);
    let interp: Vec<f64> = (0..24).map(|_| rng.gen()).collect();
    let mask = enc.disc_continuous_mask();
    let net = Mlp::new(&[enc.disc_dim(), 32, 32, 1], 34).unwrap();
    let f = |n: &Mlp| discriminator_loss(n, &xe, &we, &xo, &wo, &interp, &mask, gp).unwrap().value;
    let l = discriminator_loss(&net, &xe, &we, &xo, &wo, &interp, &mask, gp).unwrap();
    check_grad(&net, &l.grad, coords, 35, f)
}

pub fn critic_gradient_error(coords: usize, gp: f64) -> f64 {
    let k = 2;
    let data = labeled_dataset(1, k, 41);
    let enc = Encoder::new(k, data.spec.state_dim(), data.spec.goal_dim());
    let ob = offline_batch(&data, 32, k, 42);
    let n_abs = ob.terminal.iter().filter(|&&t| t).count();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let reward: Vec<f64> = (0..ob.len() + n_abs).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let net = Mlp::new(&[enc.critic_dim(), 32, 32, 1], 44).unwrap();
    let f = |n: &Mlp| critic_loss(n, &enc, &ob, &reward, 0.99, 0.05, gp).unwrap().value;
    let l = critic_loss(&net, &enc, &ob, &reward, 0.99, 0.05, gp).unwrap();
    check_grad(&net, &l.grad, coords, 45, f)
}

/// Worst errors of the high- and low-level gradients.
pub fn policy_gradient_errors(coords: usize) -> (f64, f64) {
    let k = 4;
    let data = labeled_dataset(2, k, 51);
    let enc = Encoder::new(k, data.spec.state_dim(), data.spec.goal_dim());
    let ob = offline_batch(&data, 32, k, 52);
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let raw: Vec<f64> = (0..ob.len()).map(|_| rng.gen::<f64>()).collect();
    let sum: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|x| x / sum).collect();
    let p = HierarchicalPolicy::new(enc, &[32, 32], 54, 55).unwrap();
    let l = policy_loss(&p.high, &p.low, &enc, &ob, &w).unwrap();
    let fh = |n: &Mlp| policy_loss(n, &p.low, &enc, &ob, &w).unwrap().value;
    let fl = |n: &Mlp| policy_loss(&p.high, n, &enc, &ob, &w).unwrap().value;
    (
        check_grad(&p.high, &l.grad_high, coords, 56, fh),
        check_grad(&p.low, &l.grad_low, coords, 57, fl),
    )
}

pub fn random_tables(rng: &mut ChaCha8Rng, t_len: usize, k: usize, levels: Option<i32>) -> ViterbiTables {
    let draw = |rng: &mut ChaCha8Rng| match levels {
        Some(n) => -(rng.gen_range(0..n) as f64),
        None => rng.gen_range(-5.0..0.0),
    };
    ViterbiTables {
        k,
        init: (0..k).map(|_| draw(rng)).collect(),
        trans: (1..t_len).map(|_| (0..k * k).map(|_| draw(rng)).collect()).collect(),
        emit: (0..t_len).map(|_| (0..k).map(|_| draw(rng)).collect()).collect(),
    }
}

/// Every label sequence in lexicographic order.
pub fn all_sequences(t_len: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..t_len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

/// The first maximizer in lexicographic order, i.e. the lowest-index optimum.
pub fn brute_force(tables: &ViterbiTables) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for seq in all_sequences(tables.len(), tables.k) {
        let v = tables.sequence_logprob(&seq);
        if v > best.1 {
            best = (seq, v);
        }
    }
    best
}

/// Decodes `n` random instances (T ≤ 8, K ≤ 3); returns how many differ from
/// enumeration in value bits and in labels.
pub fn viterbi_mismatches(n: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut value, mut labels) = (0, 0);
    for _ in 0..n {
        let t_len = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=3);
        let tables = random_tables(&mut rng, t_len, k, None);
        let (l, v) = decode_tables(&tables);
        let (bl, bv) = brute_force(&tables);
        value += usize::from(v.to_bits() != bv.to_bits());
        labels += usize::from(l != bl);
    }
    (value, labels)
}

/// Trains a small discriminator to convergence on two one-hot tuples drawn
/// with the given counts; returns `Ψ` for each tuple.
pub fn fit_discriminator(expert_counts: [usize; 2], offline_counts: [usize; 2]) -> [f64; 2] {
    let rows = |counts: [usize; 2]| {
        let mut v: Vec<[f64; 2]> = Vec::new();
        for (i, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                v.push(if i == 0 { [1.0, 0.0] } else { [0.0, 1.0] });
            }
        }
        Matrix::from_rows(&v)
    };
    let (xe, xo) = (rows(expert_counts), rows(offline_counts));
    let (we, wo) = (vec![1.0; xe.rows()], vec![1.0; xo.rows()]);
    let mut disc = Mlp::new(&[2, 16, 1], 5).unwrap();
    let mut opt = Adam::new(&disc, 1e-2);
    for _ in 0..3000 {
        let l = discriminator_loss(&disc, &xe, &we, &xo, &wo, &[], &[false, false], 0.0).unwrap();
        opt.step(&mut disc, &l.grad).unwrap();
    }
    let psi = |x: [f64; 2]| 1.0 / (1.0 + (-disc.forward(&x).unwrap()[0]).exp());
    [psi([1.0, 0.0]), psi([0.0, 1.0])]
}

pub const SURROGATE_GAMMA: f64 = 0.9;
pub const SURROGATE_ALPHA: f64 = 0.05;

/// States are one-hot features; every transition uses option 0.
pub fn two_state_batch() -> (TransitionBatch, Vec<f64>) {
    // (s, s', reward, copies)
    let rows = [(0, 1, 0.4, 3), (1, 0, -0.2, 1), (0, 0, 0.1, 2), (1, 1, -0.5, 2)];
    let mut s = Vec::new();
    let mut sn = Vec::new();
    let mut r = Vec::new();
    for &(a, b, rew, n) in &rows {
        for _ in 0..n {
            s.push(onehot(a));
            sn.push(onehot(b));
            r.push(rew);
        }
    }
    let n = s.len();
    let batch = TransitionBatch {
        c_prev: vec![0; n],
        s: Matrix::from_rows(&s),
        c: vec![0; n],
        a: vec![0; n],
        s_next: Matrix::from_rows(&sn),
        terminal: vec![false; n],
        g: Matrix::zeros(n, 0),
        init_s: Matrix::from_rows(&[onehot(0), onehot(0), onehot(1)]),
        init_g: Matrix::zeros(3, 0),
        origin: vec![(0, 1); n],
    };
    (batch, r)
}

fn onehot(i: usize) -> [f64; 2] {
    let mut v = [0.0; 2];
    v[i] = 1.0;
    v
}

/// `ν(c', s) = θ_s`: a linear critic whose only nonzero weights sit on the state one-hot.
pub fn tabular_critic(enc: &Encoder, theta: [f64; 2]) -> Mlp {
    let mut params = vec![0.0; enc.critic_dim() + 1];
    params[enc.k + 1] = theta[0];
    params[enc.k + 2] = theta[1];
    Mlp::from_params(&[enc.critic_dim(), 1], params).unwrap()
}

pub fn stabilized(enc: &Encoder, batch: &TransitionBatch, r: &[f64], theta: [f64; 2]) -> f64 {
    critic_loss(&tabular_critic(enc, theta), enc, batch, r, SURROGATE_GAMMA, SURROGATE_ALPHA, 0.0)
        .unwrap()
        .value
}

/// `(1-γ) E_μ ν + (1+α) E_O exp(A / (1+α) - 1)`
pub fn unstabilized(enc: &Encoder, batch: &TransitionBatch, r: &[f64], theta: [f64; 2]) -> f64 {
    let net = tabular_critic(enc, theta);
    let a = advantage(&net, enc, batch, r, SURROGATE_GAMMA).unwrap();
    let init: f64 = (0..batch.init_s.rows())
        .map(|i| if batch.init_s.get(i, 0) > 0.5 { theta[0] } else { theta[1] })
        .sum::<f64>()
        / batch.init_s.rows() as f64;
    let alpha = SURROGATE_ALPHA;
    let e: f64 = a.iter().map(|x| (x / (1.0 + alpha) - 1.0).exp()).sum::<f64>() / a.len() as f64;
    (1.0 - SURROGATE_GAMMA) * init + (1.0 + alpha) * e
}

fn argmin_2d<F: Fn([f64; 2]) -> f64>(f: F, center: [f64; 2], half: f64, step: f64) -> ([f64; 2], f64) {
    let n = (2.0 * half / step).round() as i64;
    let mut best = (center, f64::INFINITY);
    for i in 0..=n {
        for j in 0..=n {
            let t = [center[0] - half + i as f64 * step, center[1] - half + j as f64 * step];
            let v = f(t);
            if v < best.1 {
                best = (t, v);
            }
        }
    }
    best
}

fn argmin_1d<F: Fn(f64) -> f64>(f: F, center: f64, half: f64, step: f64) -> (f64, f64) {
    let n = (2.0 * half / step).round() as i64;
    (0..=n)
        .map(|i| center - half + i as f64 * step)
        .map(|x| (x, f(x)))
        .fold((center, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
}

pub struct SurrogateGap {
    /// Distance between the minimizers along the identified direction `θ_0 - θ_1`.
    pub minimizer: f64,
    pub value: f64,
    /// Change of the stabilized objective under a common shift of `ν`.
    pub shift: f64,
}

pub fn surrogate_gap() -> SurrogateGap {
    let enc = Encoder::new(1, 2, 0);
    let (batch, r) = two_state_batch();

    // The exponential form has a unique minimizer.
    let (coarse, _) = argmin_2d(|t| unstabilized(&enc, &batch, &r, t), [0.0, 0.0], 20.0, 0.05);
    let (theta_u, v_u) = argmin_2d(|t| unstabilized(&enc, &batch, &r, t), coarse, 0.06, 1e-4);

    // The log-mean-exp form is invariant to a common shift of ν, so its
    // minimizers form a line; search over the difference with θ_1 pinned
    // to the exponential form's value.
    let pin = theta_u[1];
    let g = |d: f64| stabilized(&enc, &batch, &r, [pin + d, pin]);
    let (d0, _) = argmin_1d(g, 0.0, 5.0, 0.001);
    let (d_s, v_s) = argmin_1d(g, d0, 0.003, 1e-6);

    let a = stabilized(&enc, &batch, &r, [0.3, -0.1]);
    let b = stabilized(&enc, &batch, &r, [1.3, 0.9]);
    SurrogateGap {
        minimizer: (d_s - (theta_u[0] - theta_u[1])).abs(),
        value: (v_s - v_u).abs(),
        shift: (a - b).abs(),
    }
}
