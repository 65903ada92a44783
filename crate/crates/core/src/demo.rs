//! Demonstration trajectories, dataset files, option-label bookkeeping and
//! transition-batch sampling.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::Matrix;
use crate::env::{
    self, defeaturize, featurize, imperfect_policy, reset, scripted_expert, ImperfectKind,
    LabelScheme, TaskSpec,
};
use crate::error::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Expert,
    Noisy,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionSource {
    Annotated,
    Decoded,
    Absent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Annotate {
    None,
    ExpertOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub provenance: Provenance,
    pub goal: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<usize>>,
    pub option_source: OptionSource,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn validate(&self, spec: &TaskSpec) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(Error::Validation(format!(
                "{} states for {} actions",
                self.states.len(),
                self.actions.len()
            )));
        }
        if self.states.iter().any(|s| s.len() != spec.state_dim()) {
            return Err(Error::Validation("state feature width".into()));
        }
        if self.goal.len() != spec.goal_dim() {
            return Err(Error::Validation("goal feature width".into()));
        }
        if self.actions.iter().any(|&a| a >= env::N_ACTIONS) {
            return Err(Error::Validation("action index out of range".into()));
        }
        match (&self.options, self.option_source) {
            (None, OptionSource::Absent) => Ok(()),
            (Some(o), OptionSource::Annotated | OptionSource::Decoded) if o.len() == self.len() => {
                Ok(())
            }
            _ => Err(Error::Validation(
                "option labels inconsistent with option_source".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    task_spec: TaskSpec,
    label_scheme: LabelScheme,
}

/// Expert demonstrations `D_E` and imperfect ones `D_I`; the offline set
/// `D_O` is their union. Trajectory ids enumerate `D_E` first, then `D_I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: TaskSpec,
    pub scheme: LabelScheme,
    expert: Vec<Trajectory>,
    imperfect: Vec<Trajectory>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Expert,
    Offline,
}

/// Sampled transitions `(c_prev, s, c, a, s', g)` plus an initial-tuple
/// sub-batch `(s0, g)` whose previous option is the start sentinel.
#[derive(Clone, Debug)]
pub struct TransitionBatch {
    pub c_prev: Vec<usize>,
    pub s: Matrix,
    pub c: Vec<usize>,
    pub a: Vec<usize>,
    pub s_next: Matrix,
    /// `s'` is a success state, treated as absorbing by the critic.
    pub terminal: Vec<bool>,
    pub g: Matrix,
    pub init_s: Matrix,
    pub init_g: Matrix,
    /// `(trajectory id, timestep)` each transition was drawn from.
    pub origin: Vec<(usize, usize)>,
}

impl TransitionBatch {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct GenerateConfig {
    pub n_expert: usize,
    pub n_noisy: usize,
    pub n_random: usize,
    pub noise: f64,
    pub seed: u64,
    pub annotate: Annotate,
    pub scheme: LabelScheme,
}

fn episode_seed(seed: u64, kind: u64, index: usize) -> u64 {
    // splitmix-style mixing keeps data seeds far from evaluation seeds
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(kind << 32)
        .wrapping_add(index as u64);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rolls out one demonstration. Episodes stop when every object is placed or
/// the horizon is reached.
pub fn record_episode(
    spec: &TaskSpec,
    episode_seed: u64,
    kind: Option<ImperfectKind>,
    rng: &mut ChaCha8Rng,
    scheme: LabelScheme,
) -> Result<(Trajectory, Vec<usize>)> {
    let (mut state, goal) = reset(spec, episode_seed)?;
    let (s0, g) = featurize(&state, &goal);
    let mut states = vec![s0];
    let mut actions = Vec::new();
    let mut labels = Vec::new();
    while !state.is_done() {
        let (expert_action, task) = scripted_expert(&state, &goal);
        let action = match kind {
            None => expert_action,
            Some(k) => imperfect_policy(&state, &goal, k, rng),
        };
        labels.push(task.label(scheme));
        let (next, _) = env::step(&state, &goal, action);
        actions.push(action.index());
        state = next;
        states.push(featurize(&state, &goal).0);
    }
    let provenance = match kind {
        None => Provenance::Expert,
        Some(ImperfectKind::Noisy(_)) => Provenance::Noisy,
        Some(ImperfectKind::Random) => Provenance::Random,
    };
    Ok((
        Trajectory {
            provenance,
            goal: g,
            states,
            actions,
            options: None,
            option_source: OptionSource::Absent,
        },
        labels,
    ))
}

/// Ground-truth sub-task labels of a trajectory: the labels the scripted
/// expert assigns to each visited state.
pub fn ground_truth_labels(spec: &TaskSpec, scheme: LabelScheme, traj: &Trajectory) -> Result<Vec<usize>> {
    traj.states[..traj.len()]
        .iter()
        .map(|s| {
            let (state, goal) = defeaturize(spec, s, &traj.goal)?;
            Ok(scripted_expert(&state, &goal).1.label(scheme))
        })
        .collect()
}

pub fn generate_dataset(spec: &TaskSpec, cfg: &GenerateConfig) -> Result<Dataset> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::Config(format!("noise {} outside [0, 1]", cfg.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut expert = Vec::with_capacity(cfg.n_expert);
    for i in 0..cfg.n_expert {
        let (mut traj, labels) =
            record_episode(spec, episode_seed(cfg.seed, 0, i), None, &mut rng, cfg.scheme)?;
        if cfg.annotate == Annotate::ExpertOnly {
            traj.options = Some(labels);
            traj.option_source = OptionSource::Annotated;
        }
        expert.push(traj);
    }
    let mut imperfect = Vec::with_capacity(cfg.n_noisy + cfg.n_random);
    for i in 0..cfg.n_noisy {
        let kind = Some(ImperfectKind::Noisy(cfg.noise));
        imperfect.push(record_episode(spec, episode_seed(cfg.seed, 1, i), kind, &mut rng, cfg.scheme)?.0);
    }
    for i in 0..cfg.n_random {
        let kind = Some(ImperfectKind::Random);
        imperfect.push(record_episode(spec, episode_seed(cfg.seed, 2, i), kind, &mut rng, cfg.scheme)?.0);
    }
    Ok(Dataset {
        spec: spec.clone(),
        scheme: cfg.scheme,
        expert,
        imperfect,
    })
}

impl Dataset {
    pub fn new(spec: TaskSpec, scheme: LabelScheme, trajectories: Vec<Trajectory>) -> Result<Self> {
        let mut expert = Vec::new();
        let mut imperfect = Vec::new();
        for t in trajectories {
            t.validate(&spec)?;
            match t.provenance {
                Provenance::Expert => expert.push(t),
                _ => {
                    if t.option_source == OptionSource::Annotated {
                        return Err(Error::Validation(
                            "imperfect demonstrations cannot carry annotations".into(),
                        ));
                    }
                    imperfect.push(t)
                }
            }
        }
        Ok(Self {
            spec,
            scheme,
            expert,
            imperfect,
        })
    }

    pub fn expert(&self) -> &[Trajectory] {
        &self.expert
    }

    pub fn imperfect(&self) -> &[Trajectory] {
        &self.imperfect
    }

    pub fn len(&self) -> usize {
        self.expert.len() + self.imperfect.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_expert(&self) -> usize {
        self.expert.len()
    }

    /// `D_O` in id order.
    pub fn offline(&self) -> impl Iterator<Item = &Trajectory> {
        self.expert.iter().chain(&self.imperfect)
    }

    pub fn trajectory(&self, id: usize) -> Option<&Trajectory> {
        if id < self.expert.len() {
            self.expert.get(id)
        } else {
            self.imperfect.get(id - self.expert.len())
        }
    }

    fn trajectory_mut(&mut self, id: usize) -> Option<&mut Trajectory> {
        let n = self.expert.len();
        if id < n {
            self.expert.get_mut(id)
        } else {
            self.imperfect.get_mut(id - n)
        }
    }

    pub fn has_annotations(&self) -> bool {
        !self.expert.is_empty()
            && self
                .expert
                .iter()
                .all(|t| t.option_source == OptionSource::Annotated)
    }

    /// Ids of trajectories whose labels may be rewritten by segmentation.
    pub fn unannotated_ids(&self) -> Vec<usize> {
        self.offline()
            .enumerate()
            .filter(|(_, t)| t.option_source != OptionSource::Annotated)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn set_decoded_labels(&mut self, id: usize, labels: Vec<usize>) -> Result<()> {
        let traj = self
            .trajectory_mut(id)
            .ok_or_else(|| Error::Validation(format!("no trajectory with id {id}")))?;
        if traj.option_source == OptionSource::Annotated {
            return Err(Error::Immutable(id));
        }
        if labels.len() != traj.len() {
            return Err(Error::Validation(format!(
                "{} labels for a trajectory of {} transitions",
                labels.len(),
                traj.len()
            )));
        }
        traj.options = Some(labels);
        traj.option_source = OptionSource::Decoded;
        Ok(())
    }

    /// Forgets annotations so that every trajectory is open to segmentation.
    pub fn strip_annotations(&mut self) {
        for t in self.expert.iter_mut() {
            if t.option_source == OptionSource::Annotated {
                t.options = None;
                t.option_source = OptionSource::Absent;
            }
        }
    }

    /// Drops every decoded label, leaving annotations in place.
    pub fn clear_decoded_labels(&mut self) {
        for t in self.expert.iter_mut().chain(self.imperfect.iter_mut()) {
            if t.option_source == OptionSource::Decoded {
                t.options = None;
                t.option_source = OptionSource::Absent;
            }
        }
    }

    /// Uniform sample over every transition of the source, plus an equally
    /// sized uniform sample of trajectory starts. `k` is the option count;
    /// the start sentinel is encoded as `k`.
    pub fn sample_batch<R: Rng + ?Sized>(
        &self,
        which: Source,
        batch_size: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<TransitionBatch> {
        self.sample_inner(which, batch_size, k, rng, true)
    }

    /// Label-free variant for flat policies: every transition is reported
    /// under option 0 with `k = 1`.
    pub fn sample_unlabeled<R: Rng + ?Sized>(
        &self,
        which: Source,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<TransitionBatch> {
        self.sample_inner(which, batch_size, 1, rng, false)
    }

    fn sample_inner<R: Rng + ?Sized>(
        &self,
        which: Source,
        batch_size: usize,
        k: usize,
        rng: &mut R,
        labeled: bool,
    ) -> Result<TransitionBatch> {
        let (ids, name): (Vec<usize>, _) = match which {
            Source::Expert => ((0..self.expert.len()).collect(), "expert"),
            Source::Offline => ((0..self.len()).collect(), "offline"),
        };
        // cumulative transition counts for uniform sampling over transitions
        let mut cum = Vec::with_capacity(ids.len());
        let mut total = 0usize;
        for &id in &ids {
            let t = self.trajectory(id).unwrap();
            if labeled && t.options.is_none() && !t.is_empty() {
                return Err(Error::StaleLabels(id));
            }
            total += t.len();
            cum.push(total);
        }
        if total == 0 {
            return Err(Error::EmptySource(name));
        }
        let s_dim = self.spec.state_dim();
        let g_dim = self.spec.goal_dim();
        let mut batch = TransitionBatch {
            c_prev: Vec::with_capacity(batch_size),
            s: Matrix::zeros(batch_size, s_dim),
            c: Vec::with_capacity(batch_size),
            a: Vec::with_capacity(batch_size),
            s_next: Matrix::zeros(batch_size, s_dim),
            terminal: Vec::with_capacity(batch_size),
            g: Matrix::zeros(batch_size, g_dim),
            init_s: Matrix::zeros(batch_size, s_dim),
            init_g: Matrix::zeros(batch_size, g_dim),
            origin: Vec::with_capacity(batch_size),
        };
        for row in 0..batch_size {
            let flat = rng.gen_range(0..total);
            let pos = cum.partition_point(|&c| c <= flat);
            let id = ids[pos];
            let t_idx = flat - if pos == 0 { 0 } else { cum[pos - 1] };
            let traj = self.trajectory(id).unwrap();
            let (c, c_prev) = match (labeled, traj.options.as_ref()) {
                (true, Some(labels)) => {
                    let prev = if t_idx == 0 { k } else { labels[t_idx - 1] };
                    (labels[t_idx], prev)
                }
                _ => (0, if t_idx == 0 { k } else { 0 }),
            };
            if c >= k || c_prev > k {
                return Err(Error::Validation(format!(
                    "label {c} in trajectory {id} exceeds option count {k}"
                )));
            }
            batch.c_prev.push(c_prev);
            batch.c.push(c);
            batch.a.push(traj.actions[t_idx]);
            batch.s.row_mut(row).copy_from_slice(&traj.states[t_idx]);
            batch.s_next.row_mut(row).copy_from_slice(&traj.states[t_idx + 1]);
            batch.terminal.push(env::features_all_placed(&traj.states[t_idx + 1]));
            batch.g.row_mut(row).copy_from_slice(&traj.goal);
            batch.origin.push((id, t_idx));
        }
        for row in 0..batch_size {
            let id = ids[rng.gen_range(0..ids.len())];
            let traj = self.trajectory(id).unwrap();
            batch.init_s.row_mut(row).copy_from_slice(&traj.states[0]);
            batch.init_g.row_mut(row).copy_from_slice(&traj.goal);
        }
        Ok(batch)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let header = Header {
            format_version: DATASET_FORMAT_VERSION,
            task_spec: self.spec.clone(),
            label_scheme: self.scheme,
        };
        writeln!(w, "{}", serde_json::to_string(&header).expect("plain data"))?;
        for t in self.offline() {
            writeln!(w, "{}", serde_json::to_string(t).expect("plain data"))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::format(path, "missing header line"))?
            .map_err(|e| Error::io(path, e))?;
        let raw: serde_json::Value = serde_json::from_str(&header_line)
            .map_err(|e| Error::format(path, format!("header: {e}")))?;
        let version = raw
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::format(path, "header lacks format_version"))?;
        if version != DATASET_FORMAT_VERSION as u64 {
            return Err(Error::Version {
                found: version as u32,
                expected: DATASET_FORMAT_VERSION,
            });
        }
        let header: Header = serde_json::from_value(raw)
            .map_err(|e| Error::format(path, format!("header: {e}")))?;
        let mut trajectories = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Trajectory = serde_json::from_str(&line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 2)))?;
            trajectories.push(t);
        }
        Self::new(header.task_spec, header.label_scheme, trajectories)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(annotate: Annotate) -> Dataset {
        let spec = TaskSpec::grid_pnp(2);
        generate_dataset(
            &spec,
            &GenerateConfig {
                n_expert: 4,
                n_noisy: 3,
                n_random: 2,
                noise: 0.2,
                seed: 5,
                annotate,
                scheme: LabelScheme::E3,
            },
        )
        .unwrap()
    }

    #[test]
    fn unannotated_generation_has_no_labels() {
        let ds = small(Annotate::None);
        assert!(ds.offline().all(|t| t.option_source == OptionSource::Absent));
        assert_eq!(ds.len(), 9);
        assert_eq!(ds.n_expert(), 4);
    }

    #[test]
    fn annotations_follow_scripted_expert() {
        let ds = small(Annotate::ExpertOnly);
        for t in ds.expert() {
            let labels = t.options.as_ref().unwrap();
            assert!(labels.iter().all(|&c| c < 4));
            assert_eq!(labels, &ground_truth_labels(&ds.spec, ds.scheme, t).unwrap());
            // E3 labels progress monotonically through fetch_1, deliver_1, fetch_2, deliver_2
            assert!(labels.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        }
        assert!(ds.imperfect().iter().all(|t| t.option_source == OptionSource::Absent));
    }

    #[test]
    fn annotated_trajectories_reject_writes() {
        let mut ds = small(Annotate::ExpertOnly);
        let len = ds.expert()[0].len();
        assert!(matches!(
            ds.set_decoded_labels(0, vec![0; len]),
            Err(Error::Immutable(0))
        ));
    }

    #[test]
    fn wrong_length_labels_are_rejected() {
        let mut ds = small(Annotate::None);
        let len = ds.trajectory(5).unwrap().len();
        assert!(matches!(
            ds.set_decoded_labels(5, vec![0; len + 1]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn sampling_unlabeled_data_is_stale() {
        let ds = small(Annotate::None);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            ds.sample_batch(Source::Offline, 4, 4, &mut rng),
            Err(Error::StaleLabels(_))
        ));
    }

    #[test]
    fn empty_expert_source_is_an_error() {
        let ds = Dataset::new(TaskSpec::grid_pnp(1), LabelScheme::E1, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            ds.sample_batch(Source::Expert, 4, 2, &mut rng),
            Err(Error::EmptySource("expert"))
        ));
    }

    #[test]
    fn single_transition_batch_uses_sentinel() {
        let spec = TaskSpec::grid_pnp(1);
        let traj = Trajectory {
            provenance: Provenance::Expert,
            goal: vec![0.5, 0.5],
            states: vec![vec![0.0; 6], vec![0.125, 0.0, 0.5, 0.5, 0.0, 0.0]],
            actions: vec![3],
            options: Some(vec![1]),
            option_source: OptionSource::Decoded,
        };
        let ds = Dataset::new(spec, LabelScheme::E1, vec![traj]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = ds.sample_batch(Source::Expert, 1, 2, &mut rng).unwrap();
        assert_eq!(b.c_prev, vec![2]);
        assert_eq!(b.c, vec![1]);
        assert_eq!(b.a, vec![3]);
        assert_eq!(b.s_next.row(0), &[0.125, 0.0, 0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn decoded_labels_are_read_back_by_sampling() {
        let mut ds = small(Annotate::None);
        let ids: Vec<usize> = (0..ds.len()).collect();
        for &id in &ids {
            let len = ds.trajectory(id).unwrap().len();
            let labels: Vec<usize> = (0..len).map(|t| (t * 7 + id) % 4).collect();
            ds.set_decoded_labels(id, labels).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = ds.sample_batch(Source::Offline, 500, 4, &mut rng).unwrap();
        for (i, &(id, t)) in b.origin.iter().enumerate() {
            assert_eq!(b.c[i], (t * 7 + id) % 4);
            let prev = if t == 0 { 4 } else { ((t - 1) * 7 + id) % 4 };
            assert_eq!(b.c_prev[i], prev);
        }
    }

    #[test]
    fn unknown_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        std::fs::write(
            &path,
            "{\"format_version\":9,\"task_spec\":{},\"label_scheme\":\"E1\"}\n",
        )
        .unwrap();
        assert!(matches!(
            Dataset::load(&path),
            Err(Error::Version { found: 9, .. })
        ));
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ds = small(Annotate::None);
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 40);
        std::fs::write(&path, &buf).unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Format { .. })));
        std::fs::write(&path, "").unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn actions_enum_matches_indices() {
        for (i, a) in crate::env::Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
        }
    }
}
