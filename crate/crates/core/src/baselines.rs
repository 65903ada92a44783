//! Reference methods: goal-conditioned behavior cloning and the single-option
//! g-DemoDICE learner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::{argmax, log_softmax, Adam, Matrix, Mlp};
use crate::demo::{Dataset, Source, TransitionBatch};
use crate::env::{Action, N_ACTIONS};
use crate::error::{Error, Result};
use crate::godice::{train::mix_seed, TrainConfig, Trainer};
use crate::metrics::MetricsRow;
use crate::rollout::{evaluate, Actor, EvalStats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcConfig {
    /// Weight on the offline set; `0` clones the expert data only.
    pub beta: f64,
    pub lr: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub eval_seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            beta: 0.0,
            lr: t.lr_low,
            iterations: t.iterations,
            batch_size: t.batch_size,
            hidden: t.hidden,
            seed: 0,
            eval_interval: t.eval_interval,
            eval_episodes: t.eval_episodes,
            eval_seed: t.eval_seed,
        }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if self.batch_size < 1 || self.eval_interval < 1 {
            return Err(Error::Config("batch size and eval_interval must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config(format!("hidden sizes must be positive: {:?}", self.hidden)));
        }
        Ok(())
    }
}

/// A flat goal-conditioned policy. The network input is `[s ++ pad ++ g]`;
/// `pad` is empty for plain BC and the constant option one-hot when the
/// network is a single-option low-level policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatPolicy {
    pub net: Mlp,
    pub s_dim: usize,
    pub g_dim: usize,
    #[serde(default)]
    pub pad: Vec<f64>,
}

impl FlatPolicy {
    pub fn new(s_dim: usize, g_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut sizes = vec![s_dim + g_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(N_ACTIONS);
        Ok(Self {
            net: Mlp::new(&sizes, seed)?,
            s_dim,
            g_dim,
            pad: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.s_dim + self.pad.len() + self.g_dim
    }

    fn row(&self, out: &mut [f64], s: &[f64], g: &[f64]) {
        let p = self.pad.len();
        out[..self.s_dim].copy_from_slice(s);
        out[self.s_dim..self.s_dim + p].copy_from_slice(&self.pad);
        out[self.s_dim + p..].copy_from_slice(g);
    }

    pub fn inputs(&self, s: &Matrix, g: &Matrix) -> Matrix {
        let mut x = Matrix::zeros(s.rows(), self.input_dim());
        for r in 0..s.rows() {
            self.row(x.row_mut(r), s.row(r), g.row(r));
        }
        x
    }

    pub fn select_action(&self, s: &[f64], g: &[f64]) -> Result<usize> {
        let mut x = vec![0.0; self.input_dim()];
        self.row(&mut x, s, g);
        Ok(argmax(&self.net.forward(&x)?))
    }
}

impl Actor for FlatPolicy {
    fn act(&mut self, s: &[f64], g: &[f64]) -> Result<(Action, usize)> {
        let a = self.select_action(s, g)?;
        Ok((Action::from_index(a).expect("six action logits"), 0))
    }

    fn n_options(&self) -> usize {
        1
    }
}

#[derive(Clone, Debug)]
pub struct BcLoss {
    pub value: f64,
    pub grad: Mlp,
}

fn mean_nll(policy: &FlatPolicy, batch: &TransitionBatch, scale: f64, grad: &mut Mlp) -> Result<f64> {
    let b = batch.len();
    let x = policy.inputs(&batch.s, &batch.g);
    let tape = policy.net.record(&x)?;
    let z = tape.output().unwrap();
    let mut up = Matrix::zeros(b, N_ACTIONS);
    let mut nll = 0.0;
    let w = scale / b as f64;
    for r in 0..b {
        let lp = log_softmax(z.row(r));
        nll -= lp[batch.a[r]];
        for (j, (u, l)) in up.row_mut(r).iter_mut().zip(&lp).enumerate() {
            *u = w * (l.exp() - if j == batch.a[r] { 1.0 } else { 0.0 });
        }
    }
    grad.add_scaled(&policy.net.backward(&tape, &up)?, 1.0)?;
    Ok(nll / b as f64)
}

/// `-(β E_O[log π(a|s,g)] + (1-β) E_E[log π(a|s,g)])`. The offline batch is
/// ignored, and may be absent, when `β = 0`.
pub fn bc_loss(
    policy: &FlatPolicy,
    expert: &TransitionBatch,
    offline: Option<&TransitionBatch>,
    beta: f64,
) -> Result<BcLoss> {
    let mut grad = policy.net.zeros_like();
    let mut value = 0.0;
    if beta < 1.0 {
        if expert.is_empty() {
            return Err(Error::EmptySource("expert"));
        }
        value += (1.0 - beta) * mean_nll(policy, expert, 1.0 - beta, &mut grad)?;
    }
    if beta > 0.0 {
        let offline = offline.filter(|b| !b.is_empty()).ok_or(Error::EmptySource("offline"))?;
        value += beta * mean_nll(policy, offline, beta, &mut grad)?;
    }
    Ok(BcLoss { value, grad })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcState {
    pub config: BcConfig,
    pub iteration: usize,
    pub policy: FlatPolicy,
    pub opt: Adam,
}

pub struct BcTrainer {
    state: BcState,
    data: Dataset,
}

impl BcTrainer {
    pub fn new(config: BcConfig, dataset: &Dataset) -> Result<Self> {
        config.validate()?;
        let spec = &dataset.spec;
        let policy = FlatPolicy::new(spec.state_dim(), spec.goal_dim(), &config.hidden, mix_seed(config.seed, 2))?;
        let opt = Adam::new(&policy.net, config.lr);
        Self::resume(
            BcState {
                config,
                iteration: 0,
                policy,
                opt,
            },
            dataset,
        )
    }

    pub fn resume(state: BcState, dataset: &Dataset) -> Result<Self> {
        state.config.validate()?;
        let spec = &dataset.spec;
        if state.policy.s_dim != spec.state_dim() || state.policy.g_dim != spec.goal_dim() {
            return Err(Error::Config("checkpoint policy does not match the dataset's task".into()));
        }
        Ok(Self {
            state,
            data: dataset.clone(),
        })
    }

    pub fn state(&self) -> &BcState {
        &self.state
    }

    pub fn into_state(self) -> BcState {
        self.state
    }

    pub fn policy(&self) -> &FlatPolicy {
        &self.state.policy
    }

    pub fn iteration(&self) -> usize {
        self.state.iteration
    }

    pub fn step(&mut self) -> Result<f64> {
        let n = self.state.iteration + 1;
        let cfg = &self.state.config;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1_000 + n as u64));
        let expert = self.data.sample_unlabeled(Source::Expert, cfg.batch_size, &mut rng)?;
        let offline = if cfg.beta > 0.0 {
            Some(self.data.sample_unlabeled(Source::Offline, cfg.batch_size, &mut rng)?)
        } else {
            None
        };
        let loss = bc_loss(&self.state.policy, &expert, offline.as_ref(), cfg.beta)?;
        let st = &mut self.state;
        st.opt.step(&mut st.policy.net, &loss.grad)?;
        st.iteration = n;
        Ok(loss.value)
    }

    pub fn evaluate(&self, episodes: usize, seed: u64) -> Result<EvalStats> {
        let mut actor = self.state.policy.clone();
        evaluate(&self.data.spec, &mut actor, episodes, seed)
    }

    pub fn run(&mut self, iterations: usize) -> Result<Vec<MetricsRow>> {
        let end = self.state.iteration + iterations;
        let mut rows = Vec::new();
        while self.state.iteration < end {
            let loss = self.step()?;
            let n = self.state.iteration;
            let cfg = &self.state.config;
            if n.is_multiple_of(cfg.eval_interval) || n == end {
                let stats = self.evaluate(cfg.eval_episodes, cfg.eval_seed)?;
                rows.push(MetricsRow {
                    iteration: n,
                    mean_return: stats.mean_return,
                    std_return: stats.std_return,
                    disc_loss: None,
                    critic_loss: None,
                    policy_loss: loss,
                    segmentation_accuracy: None,
                    occupancy: stats.occupancy,
                });
            }
        }
        Ok(rows)
    }
}

/// The single-option learner: the hierarchical trainer with `K = 1`.
pub fn g_demodice(config: TrainConfig, dataset: &Dataset) -> Result<Trainer> {
    if config.k != 1 {
        return Err(Error::Config(format!(
            "g-DemoDICE is the single-option learner; K = {} is not allowed",
            config.k
        )));
    }
    Trainer::new(config, dataset)
}

/// The low-level network of a single-option trainer as a flat policy.
pub fn flat_from_single_option(trainer: &Trainer) -> Result<FlatPolicy> {
    let p = trainer.policy();
    if p.k != 1 {
        return Err(Error::Config(format!("expected a single-option policy, K = {}", p.k)));
    }
    Ok(FlatPolicy {
        net: p.low.clone(),
        s_dim: p.s_dim,
        g_dim: p.g_dim,
        pad: vec![1.0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{generate_dataset, Annotate, GenerateConfig};
    use crate::env::{LabelScheme, TaskSpec};
    use crate::godice::HierarchicalActor;

    fn small_data() -> Dataset {
        let spec = TaskSpec::grid_pnp(1);
        let cfg = GenerateConfig {
            n_expert: 3,
            n_noisy: 3,
            n_random: 2,
            noise: 0.3,
            seed: 5,
            annotate: Annotate::None,
            scheme: LabelScheme::E1,
        };
        generate_dataset(&spec, &cfg).unwrap()
    }

    #[test]
    fn beta_bounds() {
        let cfg = BcConfig {
            beta: 1.5,
            ..BcConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn beta_zero_ignores_offline() {
        let data = small_data();
        let p = FlatPolicy::new(6, 2, &[8], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = data.sample_unlabeled(Source::Expert, 16, &mut rng).unwrap();
        let o = data.sample_unlabeled(Source::Offline, 16, &mut rng).unwrap();
        let with = bc_loss(&p, &e, Some(&o), 0.0).unwrap();
        let without = bc_loss(&p, &e, None, 0.0).unwrap();
        assert_eq!(with.value, without.value);
        assert_eq!(with.grad, without.grad);
    }

    #[test]
    fn beta_one_on_same_batch_matches_beta_zero() {
        let data = small_data();
        let p = FlatPolicy::new(6, 2, &[8], 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = data.sample_unlabeled(Source::Expert, 16, &mut rng).unwrap();
        let a = bc_loss(&p, &e, None, 0.0).unwrap();
        let b = bc_loss(&p, &e, Some(&e), 1.0).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.grad, b.grad);
    }

    #[test]
    fn g_demodice_rejects_multiple_options() {
        let cfg = TrainConfig {
            k: 2,
            ..TrainConfig::default()
        };
        assert!(matches!(g_demodice(cfg, &small_data()), Err(Error::Config(_))));
    }

    #[test]
    fn flat_view_acts_like_the_hierarchy() {
        let data = small_data();
        let cfg = TrainConfig {
            k: 1,
            batch_size: 8,
            hidden: vec![8],
            ..TrainConfig::default()
        };
        let trainer = g_demodice(cfg, &data).unwrap();
        let flat = flat_from_single_option(&trainer).unwrap();
        let hier = HierarchicalActor::new(trainer.policy());
        let mut flat_actor = flat.clone();
        let mut hier_actor = hier;
        let t = &data.expert()[0];
        for s in &t.states {
            assert_eq!(
                flat_actor.act(s, &t.goal).unwrap().0,
                hier_actor.act(s, &t.goal).unwrap().0
            );
        }
    }
}
