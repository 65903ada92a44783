use serde::{Deserialize, Serialize};

use crate::approximator::{argmax, Mlp};
use crate::env::{Action, N_ACTIONS};
use crate::error::Result;
use crate::rollout::Actor;

use super::Encoder;

/// `π_H(c | s, c', g)` and `π_L(a | s, c, g)` with target copies used for
/// segmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalPolicy {
    pub k: usize,
    pub s_dim: usize,
    pub g_dim: usize,
    pub high: Mlp,
    pub low: Mlp,
    pub high_target: Mlp,
    pub low_target: Mlp,
}

impl HierarchicalPolicy {
    /// Targets start as exact copies of the freshly initialized main networks.
    pub fn new(enc: Encoder, hidden: &[usize], seed_high: u64, seed_low: u64) -> Result<Self> {
        let sizes = |input: usize, out: usize| {
            let mut v = vec![input];
            v.extend_from_slice(hidden);
            v.push(out);
            v
        };
        let high = Mlp::new(&sizes(enc.high_dim(), enc.k), seed_high)?;
        let low = Mlp::new(&sizes(enc.low_dim(), N_ACTIONS), seed_low)?;
        Ok(Self {
            k: enc.k,
            s_dim: enc.s_dim,
            g_dim: enc.g_dim,
            high_target: high.clone(),
            low_target: low.clone(),
            high,
            low,
        })
    }

    pub fn encoder(&self) -> Encoder {
        Encoder::new(self.k, self.s_dim, self.g_dim)
    }

    /// Greedy option given the previous option (`k` = start sentinel).
    pub fn select_option(&self, s: &[f64], c_prev: usize, g: &[f64]) -> Result<usize> {
        let enc = self.encoder();
        let mut x = vec![0.0; enc.high_dim()];
        enc.high_row(&mut x, s, c_prev, g);
        Ok(argmax(&self.high.forward(&x)?))
    }

    /// Greedy action under option `c`.
    pub fn select_action(&self, s: &[f64], c: usize, g: &[f64]) -> Result<usize> {
        let enc = self.encoder();
        let mut x = vec![0.0; enc.low_dim()];
        enc.low_row(&mut x, s, c, g);
        Ok(argmax(&self.low.forward(&x)?))
    }

    /// `θ' ← λ θ' + (1 - λ) θ` for both target networks.
    pub fn sync_targets(&mut self, lambda: f64) -> Result<()> {
        polyak_update(&mut self.high_target, &self.high, lambda)?;
        polyak_update(&mut self.low_target, &self.low, lambda)
    }
}

/// Greedy hierarchical execution: argmax option, then argmax action.
pub struct HierarchicalActor<'a> {
    policy: &'a HierarchicalPolicy,
    c_prev: usize,
}

impl<'a> HierarchicalActor<'a> {
    pub fn new(policy: &'a HierarchicalPolicy) -> Self {
        Self {
            policy,
            c_prev: policy.k,
        }
    }
}

impl Actor for HierarchicalActor<'_> {
    fn begin_episode(&mut self) {
        self.c_prev = self.policy.k;
    }

    fn act(&mut self, s: &[f64], g: &[f64]) -> Result<(Action, usize)> {
        let c = self.policy.select_option(s, self.c_prev, g)?;
        let a = self.policy.select_action(s, c, g)?;
        self.c_prev = c;
        Ok((Action::from_index(a).expect("six action logits"), c))
    }

    fn n_options(&self) -> usize {
        self.policy.k
    }
}

pub fn polyak_update(target: &mut Mlp, main: &Mlp, lambda: f64) -> Result<()> {
    target.check_same_shape(main)?;
    for (t, m) in target.params_mut().iter_mut().zip(main.params()) {
        *t = lambda * *t + (1.0 - lambda) * m;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyak_endpoints() {
        let main = Mlp::new(&[3, 4, 2], 1).unwrap();
        let orig = Mlp::new(&[3, 4, 2], 2).unwrap();

        let mut t = orig.clone();
        polyak_update(&mut t, &main, 0.0).unwrap();
        assert_eq!(t, main);

        let mut t = orig.clone();
        polyak_update(&mut t, &main, 1.0).unwrap();
        assert_eq!(t, orig);

        let mut t = Mlp::zeros(&[1, 1]);
        let ones = Mlp::from_params(&[1, 1], vec![1.0, 1.0]).unwrap();
        polyak_update(&mut t, &ones, 0.95).unwrap();
        assert!(t.params().iter().all(|&p| (p - 0.05).abs() < 1e-15));
    }

    #[test]
    fn polyak_shape_mismatch() {
        let mut t = Mlp::zeros(&[2, 2]);
        assert!(polyak_update(&mut t, &Mlp::zeros(&[2, 3]), 0.5).is_err());
    }
}
