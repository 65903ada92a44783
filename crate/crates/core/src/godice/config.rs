use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every trajectory is re-segmented.
    Unsupervised,
    /// Expert annotations are used verbatim; only the rest is re-segmented.
    Semi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of options.
    pub k: usize,
    /// Weight of the offline-data KL regularizer.
    pub alpha: f64,
    pub gamma: f64,
    /// Polyak coefficient for the target policy.
    pub lambda: f64,
    /// Target sync and re-segmentation period, in iterations.
    pub sync_every: usize,
    pub iterations: usize,
    pub lr_critic: f64,
    pub lr_disc: f64,
    pub lr_high: f64,
    pub lr_low: f64,
    pub batch_size: usize,
    pub gp_disc: f64,
    pub gp_critic: f64,
    pub hidden: Vec<usize>,
    pub mode: Mode,
    pub seed: u64,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// First reset seed of the evaluation episodes.
    pub eval_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 2,
            alpha: 0.05,
            gamma: 0.99,
            lambda: 0.95,
            sync_every: 20,
            iterations: 10_000,
            lr_critic: 3e-4,
            lr_disc: 3e-4,
            lr_high: 3e-3,
            lr_low: 3e-3,
            batch_size: 256,
            gp_disc: 10.0,
            gp_critic: 1e-4,
            hidden: vec![64, 64],
            mode: Mode::Unsupervised,
            seed: 0,
            eval_interval: 100,
            eval_episodes: 10,
            eval_seed: 1_000_003,
        }
    }
}

impl TrainConfig {
    /// Defaults for an `n`-object task: batch `256 * n` and the per-task
    /// option count and target schedule.
    pub fn for_objects(n_objects: usize) -> Self {
        let (k, sync_every, lambda) = match n_objects {
            0 | 1 => (2, 20, 0.95),
            2 => (3, 20, 0.5),
            _ => (9, 50, 0.5),
        };
        Self {
            k,
            sync_every,
            lambda,
            batch_size: 256 * n_objects.max(1),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k < 1 {
            return bad("K must be at least 1".into());
        }
        if !(self.alpha >= 0.0) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if self.sync_every < 1 {
            return bad("M (sync_every) must be at least 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch size must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad(format!("hidden sizes must be positive: {:?}", self.hidden));
        }
        if self.eval_interval < 1 {
            return bad("eval_interval must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        let two = TrainConfig::for_objects(2);
        assert_eq!((two.batch_size, two.k, two.sync_every, two.lambda), (512, 3, 20, 0.5));
        assert_eq!(TrainConfig::for_objects(1), TrainConfig::default());
    }

    #[test]
    fn gamma_one_is_rejected() {
        let cfg = TrainConfig {
            gamma: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn range_checks() {
        for cfg in [
            TrainConfig { k: 0, ..Default::default() },
            TrainConfig { alpha: -0.1, ..Default::default() },
            TrainConfig { lambda: 1.5, ..Default::default() },
            TrainConfig { sync_every: 0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
