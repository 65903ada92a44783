//! Experiment front end: configuration files, checkpoints, and the
//! generate / train / eval / segment / transfer commands.

mod checkpoint;
mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use checkpoint::{Checkpoint, Model, CHECKPOINT_FORMAT_VERSION};
pub use config::{Algorithm, DataSection, EvalSection, ExperimentConfig, TaskSection, TrainSection};

use crate::baselines::{g_demodice, BcTrainer};
use crate::demo::{generate_dataset, ground_truth_labels, Dataset, OptionSource};
use crate::env::{Action, LabelScheme};
use crate::error::{Error, Result};
use crate::godice::{viterbi_segment, HierarchicalActor, HierarchicalPolicy, Trainer};
use crate::metrics::{append_csv, MetricsRow};
use crate::rollout::{evaluate, Actor, EvalStats};
use crate::scoring::{exact_accuracy, permutation_accuracy};

#[derive(Clone, Debug, PartialEq)]
pub struct GenerateSummary {
    pub path: PathBuf,
    pub n_expert: usize,
    pub n_imperfect: usize,
    pub n_transitions: usize,
}

pub fn cmd_generate(cfg: &ExperimentConfig, out: Option<&Path>, seed: Option<u64>) -> Result<GenerateSummary> {
    let spec = cfg.task_spec()?;
    let mut gen = cfg.generate_config()?;
    if let Some(s) = seed {
        gen.seed = s;
    }
    let data = generate_dataset(&spec, &gen)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.data.path.clone());
    data.save(&path)?;
    Ok(GenerateSummary {
        path,
        n_expert: data.n_expert(),
        n_imperfect: data.len() - data.n_expert(),
        n_transitions: data.offline().map(|t| t.len()).sum(),
    })
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Dataset file; defaults to `[data] path`.
    pub dataset: Option<PathBuf>,
    /// Checkpoint to resume from.
    pub resume: Option<PathBuf>,
    /// Checkpoint to write; defaults to `[train] checkpoint`.
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub checkpoint: Checkpoint,
    pub checkpoint_path: PathBuf,
    pub metrics_path: PathBuf,
    pub rows: Vec<MetricsRow>,
}

/// Trains (or resumes) for `[train] iterations` more iterations, appending a
/// metrics row per evaluation to the CSV and writing a checkpoint at the end.
pub fn cmd_train(cfg: &ExperimentConfig, opts: &TrainOptions) -> Result<TrainSummary> {
    let data_path = opts.dataset.clone().unwrap_or_else(|| cfg.data.path.clone());
    let data = Dataset::load(&data_path)?;
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.train.seed = s;
    }
    if let Some(out) = &opts.out {
        if cfg.train.metrics.is_none() {
            cfg.train.metrics = Some(out.with_extension("csv"));
        }
        cfg.train.checkpoint = out.clone();
    }
    let iterations = cfg.train.iterations;
    let resumed = opts.resume.as_deref().map(Checkpoint::load).transpose()?;
    if let Some(ck) = &resumed {
        if ck.task_spec != data.spec {
            return Err(Error::Config("checkpoint was trained on a different task".into()));
        }
    }
    let algorithm = resumed.as_ref().map_or(cfg.train.algorithm, |c| c.algorithm);

    let (model, rows, k) = match resumed.map(|c| c.model) {
        Some(Model::Hierarchical(state)) => {
            let mut trainer = Trainer::resume(state, &data)?;
            let rows = trainer.run(iterations)?;
            let k = trainer.config().k;
            (Model::Hierarchical(trainer.into_state()), rows, k)
        }
        Some(Model::Flat(state)) => {
            let mut trainer = BcTrainer::resume(state, &data)?;
            let rows = trainer.run(iterations)?;
            (Model::Flat(trainer.into_state()), rows, 1)
        }
        None => match algorithm {
            Algorithm::Bc => {
                let mut trainer = BcTrainer::new(cfg.bc_config()?, &data)?;
                let rows = trainer.run(iterations)?;
                (Model::Flat(trainer.into_state()), rows, 1)
            }
            Algorithm::GDemodice => {
                let mut trainer = g_demodice(cfg.train_config()?, &data)?;
                let rows = trainer.run(iterations)?;
                (Model::Hierarchical(trainer.into_state()), rows, 1)
            }
            Algorithm::Godice | Algorithm::GodiceSemi => {
                let tc = cfg.train_config()?;
                let k = tc.k;
                let mut trainer = Trainer::new(tc, &data)?;
                let rows = trainer.run(iterations)?;
                (Model::Hierarchical(trainer.into_state()), rows, k)
            }
        },
    };
    let metrics_path = cfg.metrics_path();
    append_csv(&metrics_path, &rows, k)?;
    let checkpoint = Checkpoint::new(algorithm, data.spec.clone(), data.scheme, model);
    checkpoint.save(&cfg.train.checkpoint)?;
    Ok(TrainSummary {
        checkpoint,
        checkpoint_path: cfg.train.checkpoint.clone(),
        metrics_path,
        rows,
    })
}

pub fn eval_checkpoint(ck: &Checkpoint, episodes: usize, seed: u64) -> Result<EvalStats> {
    match &ck.model {
        Model::Hierarchical(s) => {
            let mut actor = HierarchicalActor::new(&s.policy);
            evaluate(&ck.task_spec, &mut actor, episodes, seed)
        }
        Model::Flat(s) => {
            let mut actor = s.policy.clone();
            evaluate(&ck.task_spec, &mut actor, episodes, seed)
        }
    }
}

fn default_eval_seed(ck: &Checkpoint) -> u64 {
    match &ck.model {
        Model::Hierarchical(s) => s.config.eval_seed,
        Model::Flat(s) => s.config.eval_seed,
    }
}

/// Greedy rollouts of a checkpoint. `seed` defaults to the run's evaluation seed.
pub fn cmd_eval(checkpoint: &Path, episodes: usize, seed: Option<u64>) -> Result<EvalStats> {
    let ck = Checkpoint::load(checkpoint)?;
    let seed = seed.unwrap_or_else(|| default_eval_seed(&ck));
    eval_checkpoint(&ck, episodes, seed)
}

/// Return statistics and per-option occupancy; options that were never
/// selected show as `-`.
pub fn format_eval(stats: &EvalStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "episodes     {}", stats.returns.len());
    let _ = writeln!(out, "mean_return  {:.4}", stats.mean_return);
    let _ = writeln!(out, "std_return   {:.4}", stats.std_return);
    let _ = writeln!(out, "option  occupancy");
    for (c, (occ, on)) in stats.occupancy.iter().zip(&stats.activated).enumerate() {
        if *on {
            let _ = writeln!(out, "{c:<6}  {occ:.4}");
        } else {
            let _ = writeln!(out, "{c:<6}  -");
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentReport {
    pub n_trajectories: usize,
    /// Accuracy on expert trajectories up to the best relabeling of options.
    pub permutation_accuracy: Option<f64>,
    /// Accuracy without relabeling; only when the option count matches the
    /// dataset's label scheme.
    pub exact_accuracy: Option<f64>,
    /// Set when the checkpoint's option count differs from the scheme's.
    pub k_mismatch: Option<String>,
}

/// Decodes every trajectory with the checkpoint's target policy, writes the
/// labels (annotations are kept as they are) and scores expert trajectories.
pub fn cmd_segment(checkpoint: &Path, dataset: &Path, out: &Path) -> Result<SegmentReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let mut data = Dataset::load(dataset)?;
    if ck.task_spec.state_dim() != data.spec.state_dim() || ck.task_spec.goal_dim() != data.spec.goal_dim() {
        return Err(Error::Config("checkpoint and dataset describe different tasks".into()));
    }
    let k = ck.k();
    let n_labels = data.scheme.n_labels(data.spec.n_objects);
    let k_mismatch = (k != n_labels).then(|| {
        format!(
            "checkpoint has K = {k} options but scheme {:?} has {n_labels} labels",
            data.scheme
        )
    });
    let decode = |id: usize, data: &Dataset| -> Result<Vec<usize>> {
        let traj = data.trajectory(id).unwrap();
        match &ck.model {
            Model::Hierarchical(s) => {
                let p = &s.policy;
                Ok(viterbi_segment(traj, &p.high_target, &p.low_target, &p.encoder())?.0)
            }
            Model::Flat(_) => Ok(vec![0; traj.len()]),
        }
    };
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for id in 0..data.n_expert() {
        let traj = &data.expert()[id];
        let t = match (&traj.options, traj.option_source) {
            (Some(o), OptionSource::Annotated) => o.clone(),
            _ => ground_truth_labels(&data.spec, data.scheme, traj)?,
        };
        pred.extend(decode(id, &data)?);
        truth.extend(t);
    }
    for id in data.unannotated_ids() {
        let labels = decode(id, &data)?;
        data.set_decoded_labels(id, labels)?;
    }
    data.save(out)?;
    let scored = !pred.is_empty();
    Ok(SegmentReport {
        n_trajectories: data.len(),
        permutation_accuracy: scored.then(|| permutation_accuracy(&pred, &truth)),
        exact_accuracy: (scored && k_mismatch.is_none()).then(|| exact_accuracy(&pred, &truth)),
        k_mismatch,
    })
}

/// Runs an `n`-object high-level policy over a one-object low-level policy.
/// Option `c` of the `2n`-option scheme is read as primitive `c % 2` on object
/// `c / 2`; the low-level policy sees the agent, that object's feature block,
/// and that object's goal.
pub struct TransferActor<'a> {
    high: &'a HierarchicalPolicy,
    low: &'a HierarchicalPolicy,
    c_prev: usize,
}

impl<'a> TransferActor<'a> {
    pub fn new(high: &'a HierarchicalPolicy, low: &'a HierarchicalPolicy) -> Result<Self> {
        let n = high.g_dim / 2;
        if low.s_dim != 6 || low.g_dim != 2 || low.k != 2 {
            return Err(Error::Scheme(
                "the low-level checkpoint must be a one-object policy with fetch/deliver options".into(),
            ));
        }
        if high.k != 2 * n {
            return Err(Error::Scheme(format!(
                "the high-level checkpoint has {} options; a {n}-object fetch/deliver scheme needs {}",
                high.k,
                2 * n
            )));
        }
        Ok(Self {
            high,
            low,
            c_prev: high.k,
        })
    }
}

impl Actor for TransferActor<'_> {
    fn begin_episode(&mut self) {
        self.c_prev = self.high.k;
    }

    fn act(&mut self, s: &[f64], g: &[f64]) -> Result<(Action, usize)> {
        let c = self.high.select_option(s, self.c_prev, g)?;
        let (primitive, object) = (c % 2, c / 2);
        let mut s1 = Vec::with_capacity(6);
        s1.extend_from_slice(&s[..2]);
        s1.extend_from_slice(&s[2 + 4 * object..6 + 4 * object]);
        let g1 = &g[2 * object..2 * object + 2];
        let a = self.low.select_action(&s1, primitive, g1)?;
        self.c_prev = c;
        Ok((Action::from_index(a).expect("six action logits"), c))
    }

    fn n_options(&self) -> usize {
        self.high.k
    }
}

fn transfer_policy<'a>(ck: &'a Checkpoint, role: &str) -> Result<&'a HierarchicalPolicy> {
    if ck.label_scheme != LabelScheme::E3 {
        return Err(Error::Scheme(format!(
            "{role} checkpoint uses scheme {:?}; transfer needs E3",
            ck.label_scheme
        )));
    }
    match &ck.model {
        Model::Hierarchical(s) => Ok(&s.policy),
        Model::Flat(_) => Err(Error::Scheme(format!("{role} checkpoint has no option structure"))),
    }
}

/// Zero-shot transfer: evaluates the high-level policy of `high` on its own
/// task, executing options with the low-level policy of the one-object `low`.
pub fn cmd_transfer(low: &Path, high: &Path, episodes: usize, seed: Option<u64>) -> Result<EvalStats> {
    let low_ck = Checkpoint::load(low)?;
    let high_ck = Checkpoint::load(high)?;
    transfer_checkpoints(&low_ck, &high_ck, episodes, seed)
}

pub fn transfer_checkpoints(low: &Checkpoint, high: &Checkpoint, episodes: usize, seed: Option<u64>) -> Result<EvalStats> {
    if low.task_spec.n_objects != 1 {
        return Err(Error::Scheme("the low-level checkpoint must come from a one-object task".into()));
    }
    let (lt, ht) = (&low.task_spec, &high.task_spec);
    if (lt.grid_width, lt.grid_height) != (ht.grid_width, ht.grid_height) {
        return Err(Error::Config("low- and high-level checkpoints use different grids".into()));
    }
    let lp = transfer_policy(low, "low-level")?;
    let hp = transfer_policy(high, "high-level")?;
    let mut actor = TransferActor::new(hp, lp)?;
    let seed = seed.unwrap_or_else(|| default_eval_seed(high));
    evaluate(&high.task_spec, &mut actor, episodes, seed)
}
