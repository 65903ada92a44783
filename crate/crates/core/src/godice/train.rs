use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::{Adam, Mlp};
use crate::demo::{ground_truth_labels, Dataset, OptionSource, Source};
use crate::error::{Error, Result};
use crate::metrics::MetricsRow;
use crate::rollout::{evaluate, EvalStats};
use crate::scoring::permutation_accuracy;

use super::losses::{
    advantage, critic_loss, disc_inputs, discriminator_loss, importance_weights, policy_loss,
    reward_from_logits,
};
use super::{viterbi_segment, Encoder, HierarchicalActor, HierarchicalPolicy, Mode, TrainConfig};

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything needed to resume or evaluate a run, minus the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub config: TrainConfig,
    pub iteration: usize,
    pub policy: HierarchicalPolicy,
    pub critic: Mlp,
    pub disc: Mlp,
    pub opt_high: Adam,
    pub opt_low: Adam,
    pub opt_critic: Adam,
    pub opt_disc: Adam,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IterationLosses {
    pub disc: f64,
    pub critic: f64,
    pub policy: f64,
}

/// The alternating training loop. Each iteration updates the discriminator,
/// then the critic, then both policy levels; every `sync_every` iterations the
/// targets are Polyak-averaged and unannotated trajectories re-segmented.
pub struct Trainer {
    state: TrainerState,
    data: Dataset,
    enc: Encoder,
    truth: Vec<Option<Vec<usize>>>,
}

impl Trainer {
    pub fn new(config: TrainConfig, dataset: &Dataset) -> Result<Self> {
        config.validate()?;
        let spec = &dataset.spec;
        let enc = Encoder::new(config.k, spec.state_dim(), spec.goal_dim());
        let seed = config.seed;
        let policy = HierarchicalPolicy::new(enc, &config.hidden, mix_seed(seed, 1), mix_seed(seed, 2))?;
        let layers = |input: usize| {
            let mut v = vec![input];
            v.extend_from_slice(&config.hidden);
            v.push(1);
            v
        };
        let critic = Mlp::new(&layers(enc.critic_dim()), mix_seed(seed, 3))?;
        let disc = Mlp::new(&layers(enc.disc_dim()), mix_seed(seed, 4))?;
        let state = TrainerState {
            opt_high: Adam::new(&policy.high, config.lr_high),
            opt_low: Adam::new(&policy.low, config.lr_low),
            opt_critic: Adam::new(&critic, config.lr_critic),
            opt_disc: Adam::new(&disc, config.lr_disc),
            config,
            iteration: 0,
            policy,
            critic,
            disc,
        };
        Self::resume(state, dataset)
    }

    /// Rebuilds a trainer from saved state and runs the segmentation pass
    /// that precedes the first iteration.
    pub fn resume(state: TrainerState, dataset: &Dataset) -> Result<Self> {
        let config = &state.config;
        config.validate()?;
        if dataset.n_expert() == 0 || dataset.expert().iter().all(|t| t.is_empty()) {
            return Err(Error::Validation("training needs expert transitions".into()));
        }
        let spec = &dataset.spec;
        let enc = Encoder::new(config.k, spec.state_dim(), spec.goal_dim());
        if state.policy.encoder() != enc {
            return Err(Error::Config(
                "checkpoint networks do not match the dataset's task or option count".into(),
            ));
        }
        let truth = dataset
            .expert()
            .iter()
            .map(|t| match (&t.options, t.option_source) {
                (Some(o), OptionSource::Annotated) => Some(o.clone()),
                _ => ground_truth_labels(spec, dataset.scheme, t).ok(),
            })
            .collect();
        let mut data = dataset.clone();
        data.clear_decoded_labels();
        match config.mode {
            Mode::Unsupervised => data.strip_annotations(),
            Mode::Semi => {
                if !data.has_annotations() {
                    return Err(Error::Config(
                        "semi-supervised training needs annotated expert demonstrations".into(),
                    ));
                }
                let max_label = data
                    .expert()
                    .iter()
                    .flat_map(|t| t.options.iter().flatten())
                    .copied()
                    .max()
                    .unwrap_or(0);
                if max_label >= config.k {
                    return Err(Error::Config(format!(
                        "annotations use label {max_label} but K = {}",
                        config.k
                    )));
                }
            }
        }
        let mut trainer = Self {
            state,
            data,
            enc,
            truth,
        };
        trainer.segment()?;
        Ok(trainer)
    }

    pub fn state(&self) -> &TrainerState {
        &self.state
    }

    pub fn into_state(self) -> TrainerState {
        self.state
    }

    pub fn config(&self) -> &TrainConfig {
        &self.state.config
    }

    pub fn policy(&self) -> &HierarchicalPolicy {
        &self.state.policy
    }

    pub fn iteration(&self) -> usize {
        self.state.iteration
    }

    /// The working dataset with current labels.
    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    /// Viterbi-decodes every unannotated trajectory under the target policy.
    pub fn segment(&mut self) -> Result<()> {
        let p = &self.state.policy;
        for id in self.data.unannotated_ids() {
            let traj = self.data.trajectory(id).unwrap();
            let (labels, _) = viterbi_segment(traj, &p.high_target, &p.low_target, &self.enc)?;
            self.data.set_decoded_labels(id, labels)?;
        }
        Ok(())
    }

    /// One iteration of the loop.
    pub fn step(&mut self) -> Result<IterationLosses> {
        let n = self.state.iteration + 1;
        let cfg = self.state.config.clone();
        if n.is_multiple_of(cfg.sync_every) {
            self.state.policy.sync_targets(cfg.lambda)?;
            self.segment()?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1_000 + n as u64));
        let k = cfg.k;
        let eb = self.data.sample_batch(Source::Expert, cfg.batch_size, k, &mut rng)?;
        let ob = self.data.sample_batch(Source::Offline, cfg.batch_size, k, &mut rng)?;
        let interp: Vec<f64> = (0..cfg.batch_size).map(|_| rng.gen::<f64>()).collect();
        let enc = self.enc;
        let (xe, we) = disc_inputs(&enc, &eb, cfg.gamma);
        let (xo, wo) = disc_inputs(&enc, &ob, cfg.gamma);

        let st = &mut self.state;
        let dl = discriminator_loss(
            &st.disc,
            &xe,
            &we,
            &xo,
            &wo,
            &interp,
            &enc.disc_continuous_mask(),
            cfg.gp_disc,
        )?;
        st.opt_disc.step(&mut st.disc, &dl.grad)?;

        let reward = reward_from_logits(&st.disc.forward_batch(&xo)?);
        let cl = critic_loss(&st.critic, &enc, &ob, &reward, cfg.gamma, cfg.alpha, cfg.gp_critic)?;
        st.opt_critic.step(&mut st.critic, &cl.grad)?;

        let adv = advantage(&st.critic, &enc, &ob, &reward, cfg.gamma)?;
        let weights = importance_weights(&adv, cfg.alpha);
        let pl = policy_loss(&st.policy.high, &st.policy.low, &enc, &ob, &weights)?;
        st.opt_high.step(&mut st.policy.high, &pl.grad_high)?;
        st.opt_low.step(&mut st.policy.low, &pl.grad_low)?;

        st.iteration = n;
        Ok(IterationLosses {
            disc: dl.value,
            critic: cl.value,
            policy: pl.value,
        })
    }

    /// Greedy evaluation of the main policy.
    pub fn evaluate(&self, episodes: usize, seed: u64) -> Result<EvalStats> {
        let mut actor = HierarchicalActor::new(&self.state.policy);
        evaluate(&self.data.spec, &mut actor, episodes, seed)
    }

    /// Permutation-matched accuracy of target-policy decoding on expert
    /// trajectories with known sub-task labels.
    pub fn segmentation_accuracy(&self) -> Result<Option<f64>> {
        let p = &self.state.policy;
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for (traj, t) in self.data.expert().iter().zip(&self.truth) {
            let Some(t) = t else { continue };
            let (labels, _) = viterbi_segment(traj, &p.high_target, &p.low_target, &self.enc)?;
            pred.extend(labels);
            truth.extend_from_slice(t);
        }
        Ok((!pred.is_empty()).then(|| permutation_accuracy(&pred, &truth)))
    }

    /// Runs `iterations` more iterations, emitting a metrics row every
    /// `eval_interval` iterations and after the last one.
    pub fn run(&mut self, iterations: usize) -> Result<Vec<MetricsRow>> {
        let end = self.state.iteration + iterations;
        let mut rows = Vec::new();
        while self.state.iteration < end {
            let losses = self.step()?;
            let n = self.state.iteration;
            if n.is_multiple_of(self.state.config.eval_interval) || n == end {
                rows.push(self.metrics_row(n, losses)?);
            }
        }
        Ok(rows)
    }

    fn metrics_row(&self, iteration: usize, losses: IterationLosses) -> Result<MetricsRow> {
        let cfg = &self.state.config;
        let stats = self.evaluate(cfg.eval_episodes, cfg.eval_seed)?;
        Ok(MetricsRow {
            iteration,
            mean_return: stats.mean_return,
            std_return: stats.std_return,
            disc_loss: Some(losses.disc),
            critic_loss: Some(losses.critic),
            policy_loss: losses.policy,
            segmentation_accuracy: self.segmentation_accuracy()?,
            occupancy: stats.occupancy,
        })
    }
}
