//! Deterministic goal-conditioned grid pick-and-place tasks (GridPnP-n).
//!
//! An agent moves on a `W x H` grid, picks up objects and drops them on
//! their goal cells. Each object pays +1 on its first successful pick and +1
//! when first dropped on its own goal, so the maximum episode return is
//! `2 * n_objects`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_ACTIONS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Pick = 4,
    Drop = 5,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Pick,
        Action::Drop,
    ];

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub grid_width: usize,
    pub grid_height: usize,
    pub n_objects: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl TaskSpec {
    /// 8x8 grid, horizon `50 * n_objects`.
    pub fn grid_pnp(n_objects: usize) -> Self {
        Self {
            grid_width: 8,
            grid_height: 8,
            n_objects,
            horizon: 50 * n_objects,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_width == 0 || self.grid_height == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if !(1..=3).contains(&self.n_objects) {
            return Err(Error::Config(format!(
                "n_objects must be in 1..=3, got {}",
                self.n_objects
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.grid_width * self.grid_height < 2 * self.n_objects + 1 {
            return Err(Error::Config(format!(
                "{}x{} grid cannot hold an agent, {} objects and {} goals",
                self.grid_width, self.grid_height, self.n_objects, self.n_objects
            )));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        2 + 4 * self.n_objects
    }

    pub fn goal_dim(&self) -> usize {
        2 * self.n_objects
    }

    pub fn max_return(&self) -> f64 {
        2.0 * self.n_objects as f64
    }
}

pub type Cell = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ObjectState {
    pub cell: Cell,
    pub carried: bool,
    pub placed: bool,
    pub picked_once: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub width: usize,
    pub height: usize,
    pub horizon: usize,
    pub agent: Cell,
    pub objects: Vec<ObjectState>,
    pub carrying: Option<usize>,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GoalVector {
    pub cells: Vec<Cell>,
}

impl EnvState {
    pub fn all_placed(&self) -> bool {
        self.objects.iter().all(|o| o.placed)
    }

    /// Episode over: every object placed or the horizon reached.
    pub fn is_done(&self) -> bool {
        self.all_placed() || self.step >= self.horizon
    }
}

/// Samples agent, object and goal cells without collision.
pub fn reset(spec: &TaskSpec, episode_seed: u64) -> Result<(EnvState, GoalVector)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
    rng.set_stream(spec.seed);
    let n = spec.n_objects;
    let n_cells = spec.grid_width * spec.grid_height;
    let cells: Vec<Cell> = sample(&mut rng, n_cells, 2 * n + 1)
        .into_iter()
        .map(|i| (i % spec.grid_width, i / spec.grid_width))
        .collect();
    let state = EnvState {
        width: spec.grid_width,
        height: spec.grid_height,
        horizon: spec.horizon,
        agent: cells[0],
        objects: cells[1..=n]
            .iter()
            .map(|&cell| ObjectState {
                cell,
                carried: false,
                placed: false,
                picked_once: false,
            })
            .collect(),
        carrying: None,
        step: 0,
    };
    let goal = GoalVector {
        cells: cells[n + 1..].to_vec(),
    };
    Ok((state, goal))
}

/// Applies one action. Moves clamp at the borders; invalid Pick/Drop are
/// no-ops. A state whose step counter already reached the horizon is returned
/// unchanged with zero reward.
pub fn step(state: &EnvState, goal: &GoalVector, action: Action) -> (EnvState, f64) {
    let mut next = state.clone();
    if state.step >= state.horizon {
        return (next, 0.0);
    }
    next.step += 1;
    let mut reward = 0.0;
    let (x, y) = state.agent;
    match action {
        Action::Up => next.agent.1 = y.saturating_sub(1),
        Action::Down => next.agent.1 = (y + 1).min(state.height - 1),
        Action::Left => next.agent.0 = x.saturating_sub(1),
        Action::Right => next.agent.0 = (x + 1).min(state.width - 1),
        Action::Pick => {
            if state.carrying.is_none() {
                if let Some(i) = state
                    .objects
                    .iter()
                    .position(|o| o.cell == state.agent && !o.placed && !o.carried)
                {
                    let obj = &mut next.objects[i];
                    obj.carried = true;
                    if !obj.picked_once {
                        obj.picked_once = true;
                        reward = 1.0;
                    }
                    next.carrying = Some(i);
                }
            }
        }
        Action::Drop => {
            if let Some(i) = state.carrying {
                let obj = &mut next.objects[i];
                obj.carried = false;
                obj.cell = state.agent;
                if state.agent == goal.cells[i] {
                    obj.placed = true;
                    reward = 1.0;
                }
                next.carrying = None;
            }
        }
    }
    if let Some(i) = next.carrying {
        next.objects[i].cell = next.agent;
    }
    (next, reward)
}

/// Network input encoding: `(s_feat, g_feat)` of widths `2 + 4n` and `2n`.
pub fn featurize(state: &EnvState, goal: &GoalVector) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (state.width as f64, state.height as f64);
    let mut s = Vec::with_capacity(2 + 4 * state.objects.len());
    s.push(state.agent.0 as f64 / w);
    s.push(state.agent.1 as f64 / h);
    for o in &state.objects {
        s.push(o.cell.0 as f64 / w);
        s.push(o.cell.1 as f64 / h);
        s.push(if o.carried { 1.0 } else { 0.0 });
        s.push(if o.placed { 1.0 } else { 0.0 });
    }
    (s, goal_features(goal, state.width, state.height))
}

/// Whether a state feature vector has every object placed, i.e. the episode
/// ended in success.
pub fn features_all_placed(s: &[f64]) -> bool {
    s.len() > 2 && s[2..].chunks(4).all(|b| b.len() == 4 && b[3] > 0.5)
}

pub fn goal_features(goal: &GoalVector, width: usize, height: usize) -> Vec<f64> {
    goal.cells
        .iter()
        .flat_map(|&(x, y)| [x as f64 / width as f64, y as f64 / height as f64])
        .collect()
}

fn decode_coord(v: f64, extent: usize) -> usize {
    (v * extent as f64).round().max(0.0) as usize
}

/// Inverse of [`featurize`]. The step counter is not encoded and comes back 0.
pub fn defeaturize(spec: &TaskSpec, s: &[f64], g: &[f64]) -> Result<(EnvState, GoalVector)> {
    let n = spec.n_objects;
    if s.len() != spec.state_dim() || g.len() != spec.goal_dim() {
        return Err(Error::Validation(format!(
            "feature widths {}/{} do not match a {}-object task",
            s.len(),
            g.len(),
            n
        )));
    }
    let (w, h) = (spec.grid_width, spec.grid_height);
    let agent = (decode_coord(s[0], w), decode_coord(s[1], h));
    let objects: Vec<ObjectState> = (0..n)
        .map(|i| {
            let b = &s[2 + 4 * i..6 + 4 * i];
            ObjectState {
                cell: (decode_coord(b[0], w), decode_coord(b[1], h)),
                carried: b[2] > 0.5,
                placed: b[3] > 0.5,
                picked_once: b[2] > 0.5 || b[3] > 0.5,
            }
        })
        .collect();
    let carrying = objects.iter().position(|o| o.carried);
    let goal = GoalVector {
        cells: (0..n)
            .map(|i| (decode_coord(g[2 * i], w), decode_coord(g[2 * i + 1], h)))
            .collect(),
    };
    Ok((
        EnvState {
            width: w,
            height: h,
            horizon: spec.horizon,
            agent,
            objects,
            carrying,
            step: 0,
        },
        goal,
    ))
}

/// Ground-truth option vocabularies for scripted demonstrations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelScheme {
    /// {fetch, deliver}
    E1,
    /// {object_1 .. object_n}
    E2,
    /// {fetch_i, deliver_i}, fetch_i = 2i and deliver_i = 2i + 1
    E3,
}

impl LabelScheme {
    pub fn n_labels(self, n_objects: usize) -> usize {
        match self {
            LabelScheme::E1 => 2,
            LabelScheme::E2 => n_objects,
            LabelScheme::E3 => 2 * n_objects,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "E1" => Ok(LabelScheme::E1),
            "E2" => Ok(LabelScheme::E2),
            "E3" => Ok(LabelScheme::E3),
            other => Err(Error::Config(format!("unknown label scheme {other:?}"))),
        }
    }
}

/// The sub-task an expert is executing: which object, and whether it is
/// being fetched or delivered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubTask {
    pub object: usize,
    pub deliver: bool,
}

impl SubTask {
    pub fn label(self, scheme: LabelScheme) -> usize {
        match scheme {
            LabelScheme::E1 => self.deliver as usize,
            LabelScheme::E2 => self.object,
            LabelScheme::E3 => 2 * self.object + self.deliver as usize,
        }
    }
}

fn step_toward(from: Cell, to: Cell) -> Action {
    if from.0 < to.0 {
        Action::Right
    } else if from.0 > to.0 {
        Action::Left
    } else if from.1 < to.1 {
        Action::Down
    } else {
        Action::Up
    }
}

/// Current sub-task: deliver the carried object if any, otherwise fetch the
/// lowest-index unplaced object. After completion, the last object's delivery.
pub fn current_subtask(state: &EnvState) -> SubTask {
    if let Some(i) = state.carrying {
        return SubTask {
            object: i,
            deliver: true,
        };
    }
    match state.objects.iter().position(|o| !o.placed) {
        Some(i) => SubTask {
            object: i,
            deliver: false,
        },
        None => SubTask {
            object: state.objects.len() - 1,
            deliver: true,
        },
    }
}

/// Deterministic scripted expert: navigate x first, then y, to the current
/// target and Pick or Drop there.
pub fn scripted_expert(state: &EnvState, goal: &GoalVector) -> (Action, SubTask) {
    let task = current_subtask(state);
    if state.all_placed() {
        return (Action::Up, task);
    }
    let target = if task.deliver {
        goal.cells[task.object]
    } else {
        state.objects[task.object].cell
    };
    let action = if state.agent == target {
        if task.deliver {
            Action::Drop
        } else {
            Action::Pick
        }
    } else {
        step_toward(state.agent, target)
    };
    (action, task)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ImperfectKind {
    Noisy(f64),
    Random,
}

pub fn random_action<R: Rng + ?Sized>(rng: &mut R) -> Action {
    Action::ALL[rng.gen_range(0..N_ACTIONS)]
}

/// Noisy(ε) follows the expert with probability 1-ε, otherwise acts uniformly.
pub fn imperfect_policy<R: Rng + ?Sized>(
    state: &EnvState,
    goal: &GoalVector,
    kind: ImperfectKind,
    rng: &mut R,
) -> Action {
    match kind {
        ImperfectKind::Noisy(eps) => {
            let expert = scripted_expert(state, goal).0;
            if eps > 0.0 && rng.gen::<f64>() < eps {
                random_action(rng)
            } else {
                expert
            }
        }
        ImperfectKind::Random => random_action(rng),
    }
}

/// Runs an episode to completion and returns the total reward.
pub fn rollout_return<F>(spec: &TaskSpec, episode_seed: u64, mut policy: F) -> Result<f64>
where
    F: FnMut(&EnvState, &GoalVector) -> Action,
{
    let (mut state, goal) = reset(spec, episode_seed)?;
    let mut total = 0.0;
    while !state.is_done() {
        let a = policy(&state, &goal);
        let (next, r) = step(&state, &goal, a);
        total += r;
        state = next;
    }
    Ok(total)
}
