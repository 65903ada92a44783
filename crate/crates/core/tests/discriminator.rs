mod common;

use common::oracles::fit_discriminator;
use godice::godice::log_ratio_reward;

#[test]
fn converges_to_the_count_ratio() {
    // d_E = (3/4, 1/4), d_O = (1/4, 3/4)
    let psi = fit_discriminator([3, 1], [1, 3]);
    assert!((psi[0] - 0.25).abs() < 0.03, "{psi:?}");
    assert!((psi[1] - 0.75).abs() < 0.03, "{psi:?}");
}

#[test]
fn coinciding_distributions_give_zero_reward() {
    let psi = fit_discriminator([2, 5], [2, 5]);
    for p in psi {
        assert!((p - 0.5).abs() < 0.02, "{psi:?}");
        assert!(log_ratio_reward(p).abs() < 0.05);
    }
}
