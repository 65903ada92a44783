mod common;

use common::oracles::{brute_force, random_tables, viterbi_mismatches};
use godice::godice::{decode_tables, viterbi_segment, Encoder, HierarchicalPolicy, ViterbiTables};
use godice::demo::Trajectory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn decoding_equals_enumeration_on_random_instances() {
    assert_eq!(viterbi_mismatches(200, 2024), (0, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    for _ in 0..50 {
        let tables = random_tables(&mut rng, 6, 3, None);
        let (labels, value) = decode_tables(&tables);
        assert_eq!(tables.sequence_logprob(&labels).to_bits(), value.to_bits());
    }
}

#[test]
fn tied_instances_decode_to_an_optimal_sequence() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let t_len = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=3);
        let tables = random_tables(&mut rng, t_len, k, Some(2));
        let (labels, value) = decode_tables(&tables);
        let (_, bf_value) = brute_force(&tables);
        assert_eq!(value.to_bits(), bf_value.to_bits());
        assert_eq!(tables.sequence_logprob(&labels), value);
    }
}

#[test]
fn flat_tables_pick_the_lowest_index() {
    let tables = ViterbiTables {
        k: 3,
        init: vec![0.0; 3],
        trans: vec![vec![0.0; 9]; 4],
        emit: vec![vec![-1.0; 3]; 5],
    };
    assert_eq!(decode_tables(&tables).0, vec![0; 5]);
    // a tie in the last step resolves to the lower label, and so does its predecessor
    let tables = ViterbiTables {
        k: 2,
        init: vec![-1.0, -1.0],
        trans: vec![vec![0.0, 0.0, 0.0, 0.0]],
        emit: vec![vec![-1.0, -1.0], vec![-2.0, -2.0]],
    };
    assert_eq!(decode_tables(&tables).0, vec![0, 0]);
}

fn short_trajectory(seed: u64, len: usize) -> Trajectory {
    let data = common::labeled_dataset(1, 2, seed);
    let traj = data.imperfect()[0].clone();
    assert!(traj.len() >= len);
    Trajectory {
        states: traj.states[..=len].to_vec(),
        actions: traj.actions[..len].to_vec(),
        options: None,
        option_source: godice::demo::OptionSource::Absent,
        ..traj
    }
}

#[test]
fn random_policies_on_five_steps_match_enumeration() {
    let traj = short_trajectory(3, 5);
    for seed in 0..10 {
        let enc = Encoder::new(2, 6, 2);
        let p = HierarchicalPolicy::new(enc, &[16], seed, seed + 100).unwrap();
        let (labels, value) = viterbi_segment(&traj, &p.high_target, &p.low_target, &enc).unwrap();
        let tables = ViterbiTables::from_policy(&p.high_target, &p.low_target, &enc, &traj).unwrap();
        let (bf_labels, bf_value) = brute_force(&tables);
        assert_eq!(value.to_bits(), bf_value.to_bits());
        assert_eq!(labels, bf_labels);
    }
}
