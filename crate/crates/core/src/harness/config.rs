use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BcConfig;
use crate::demo::{Annotate, GenerateConfig};
use crate::env::{LabelScheme, TaskSpec};
use crate::error::{Error, Result};
use crate::godice::{Mode, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Godice,
    GodiceSemi,
    GDemodice,
    Bc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub n_objects: usize,
    pub grid_width: usize,
    pub grid_height: usize,
    /// Defaults to `50 * n_objects`.
    pub horizon: Option<usize>,
    pub seed: u64,
}

impl Default for TaskSection {
    fn default() -> Self {
        let t = TaskSpec::grid_pnp(1);
        Self {
            n_objects: t.n_objects,
            grid_width: t.grid_width,
            grid_height: t.grid_height,
            horizon: None,
            seed: t.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub n_expert: usize,
    pub n_noisy: usize,
    pub n_random: usize,
    pub noise: f64,
    pub seed: u64,
    pub annotate: bool,
    pub scheme: String,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("dataset.jsonl"),
            n_expert: 25,
            n_noisy: 50,
            n_random: 25,
            noise: 0.3,
            seed: 0,
            annotate: false,
            scheme: "E3".into(),
        }
    }
}

/// Unset fields take the per-task defaults of [`TrainConfig::for_objects`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub algorithm: Algorithm,
    pub k: Option<usize>,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: Option<f64>,
    pub sync_every: Option<usize>,
    pub iterations: usize,
    pub lr_critic: f64,
    pub lr_disc: f64,
    pub lr_high: f64,
    pub lr_low: f64,
    pub batch_size: Option<usize>,
    pub gp_disc: f64,
    pub gp_critic: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// BC mixing weight on the offline set.
    pub beta: f64,
    pub checkpoint: PathBuf,
    /// Defaults to the checkpoint path with a `.csv` extension.
    pub metrics: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            algorithm: Algorithm::Godice,
            k: None,
            alpha: t.alpha,
            gamma: t.gamma,
            lambda: None,
            sync_every: None,
            iterations: t.iterations,
            lr_critic: t.lr_critic,
            lr_disc: t.lr_disc,
            lr_high: t.lr_high,
            lr_low: t.lr_low,
            batch_size: None,
            gp_disc: t.gp_disc,
            gp_critic: t.gp_critic,
            hidden: t.hidden,
            seed: t.seed,
            beta: 0.0,
            checkpoint: PathBuf::from("checkpoint.json"),
            metrics: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub interval: usize,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            interval: t.eval_interval,
            episodes: t.eval_episodes,
            seed: t.eval_seed,
        }
    }
}

/// The experiment file: `key = value` lines under `[task]`, `[data]`,
/// `[train]` and `[eval]`. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskSection,
    pub data: DataSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn task_spec(&self) -> Result<TaskSpec> {
        let t = &self.task;
        let spec = TaskSpec {
            grid_width: t.grid_width,
            grid_height: t.grid_height,
            n_objects: t.n_objects,
            horizon: t.horizon.unwrap_or(50 * t.n_objects),
            seed: t.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn scheme(&self) -> Result<LabelScheme> {
        LabelScheme::parse(&self.data.scheme)
    }

    pub fn generate_config(&self) -> Result<GenerateConfig> {
        let d = &self.data;
        Ok(GenerateConfig {
            n_expert: d.n_expert,
            n_noisy: d.n_noisy,
            n_random: d.n_random,
            noise: d.noise,
            seed: d.seed,
            annotate: if d.annotate {
                Annotate::ExpertOnly
            } else {
                Annotate::None
            },
            scheme: self.scheme()?,
        })
    }

    /// Trainer settings for the hierarchical algorithms.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let n = self.task.n_objects;
        let base = TrainConfig::for_objects(n);
        let t = &self.train;
        let (default_k, mode) = match t.algorithm {
            Algorithm::Godice => (base.k, Mode::Unsupervised),
            Algorithm::GodiceSemi => (self.scheme()?.n_labels(n), Mode::Semi),
            Algorithm::GDemodice => (1, Mode::Unsupervised),
            Algorithm::Bc => {
                return Err(Error::Config("bc has no hierarchical trainer settings".into()))
            }
        };
        let cfg = TrainConfig {
            k: t.k.unwrap_or(default_k),
            alpha: t.alpha,
            gamma: t.gamma,
            lambda: t.lambda.unwrap_or(base.lambda),
            sync_every: t.sync_every.unwrap_or(base.sync_every),
            iterations: t.iterations,
            lr_critic: t.lr_critic,
            lr_disc: t.lr_disc,
            lr_high: t.lr_high,
            lr_low: t.lr_low,
            batch_size: t.batch_size.unwrap_or(base.batch_size),
            gp_disc: t.gp_disc,
            gp_critic: t.gp_critic,
            hidden: t.hidden.clone(),
            mode,
            seed: t.seed,
            eval_interval: self.eval.interval,
            eval_episodes: self.eval.episodes,
            eval_seed: self.eval.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bc_config(&self) -> Result<BcConfig> {
        let t = &self.train;
        let cfg = BcConfig {
            beta: t.beta,
            lr: t.lr_low,
            iterations: t.iterations,
            batch_size: t
                .batch_size
                .unwrap_or(TrainConfig::for_objects(self.task.n_objects).batch_size),
            hidden: t.hidden.clone(),
            seed: t.seed,
            eval_interval: self.eval.interval,
            eval_episodes: self.eval.episodes,
            eval_seed: self.eval.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.train
            .metrics
            .clone()
            .unwrap_or_else(|| self.train.checkpoint.with_extension("csv"))
    }
}
