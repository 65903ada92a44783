//! Greedy evaluation rollouts and option-occupancy statistics.

use crate::env::{self, featurize, reset, Action, TaskSpec};
use crate::error::{Error, Result};

/// Anything that can drive an episode greedily. `act` returns the action and
/// the option that produced it (flat policies report option 0).
pub trait Actor {
    fn begin_episode(&mut self) {}
    fn act(&mut self, s: &[f64], g: &[f64]) -> Result<(Action, usize)>;
    fn n_options(&self) -> usize;
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub ret: f64,
    pub options: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub mean_return: f64,
    pub std_return: f64,
    pub returns: Vec<f64>,
    /// Mean over episodes of the per-episode fraction of steps spent in each option.
    pub occupancy: Vec<f64>,
    /// Whether each option was selected at least once.
    pub activated: Vec<bool>,
    pub traces: Vec<EpisodeTrace>,
}

pub fn run_episode<A: Actor + ?Sized>(spec: &TaskSpec, actor: &mut A, episode_seed: u64) -> Result<EpisodeTrace> {
    let (mut state, goal) = reset(spec, episode_seed)?;
    actor.begin_episode();
    let mut ret = 0.0;
    let mut options = Vec::new();
    while !state.is_done() {
        let (s, g) = featurize(&state, &goal);
        let (a, c) = actor.act(&s, &g)?;
        options.push(c);
        let (next, r) = env::step(&state, &goal, a);
        ret += r;
        state = next;
    }
    Ok(EpisodeTrace { ret, options })
}

/// Occupancy summary from raw traces.
pub fn occupancy(traces: &[EpisodeTrace], k: usize) -> (Vec<f64>, Vec<bool>) {
    let mut occ = vec![0.0; k];
    let mut activated = vec![false; k];
    let mut counted = 0usize;
    for tr in traces {
        if tr.options.is_empty() {
            continue;
        }
        counted += 1;
        let mut counts = vec![0usize; k];
        for &c in &tr.options {
            counts[c] += 1;
            activated[c] = true;
        }
        for (o, n) in occ.iter_mut().zip(&counts) {
            *o += *n as f64 / tr.options.len() as f64;
        }
    }
    if counted > 0 {
        for o in &mut occ {
            *o /= counted as f64;
        }
    }
    (occ, activated)
}

/// Greedy evaluation over `episodes` resets seeded `seed, seed+1, ...`.
pub fn evaluate<A: Actor + ?Sized>(spec: &TaskSpec, actor: &mut A, episodes: usize, seed: u64) -> Result<EvalStats> {
    if episodes == 0 {
        return Err(Error::Validation("evaluation needs at least one episode".into()));
    }
    let traces = (0..episodes)
        .map(|i| run_episode(spec, actor, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let returns: Vec<f64> = traces.iter().map(|t| t.ret).collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let (occ, activated) = occupancy(&traces, actor.n_options());
    Ok(EvalStats {
        mean_return: mean,
        std_return: var.sqrt(),
        returns,
        occupancy: occ,
        activated,
        traces,
    })
}

/// The scripted expert as an actor, reporting its sub-task under a scheme.
pub struct ExpertActor {
    pub spec: TaskSpec,
    pub scheme: env::LabelScheme,
}

impl Actor for ExpertActor {
    fn act(&mut self, s: &[f64], g: &[f64]) -> Result<(Action, usize)> {
        let (state, goal) = env::defeaturize(&self.spec, s, g)?;
        let (a, task) = env::scripted_expert(&state, &goal);
        Ok((a, task.label(self.scheme)))
    }

    fn n_options(&self) -> usize {
        self.scheme.n_labels(self.spec.n_objects)
    }
}
