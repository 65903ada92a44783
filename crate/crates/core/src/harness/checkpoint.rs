use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::BcState;
use crate::env::{LabelScheme, TaskSpec};
use crate::error::{Error, Result};
use crate::godice::TrainerState;

use super::Algorithm;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Hierarchical(TrainerState),
    Flat(BcState),
}

/// A resumable training snapshot: networks, targets, optimizer moments,
/// configuration and iteration counter, tagged with the task it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub task_spec: TaskSpec,
    pub label_scheme: LabelScheme,
    pub model: Model,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl Checkpoint {
    pub fn new(algorithm: Algorithm, task_spec: TaskSpec, label_scheme: LabelScheme, model: Model) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            algorithm,
            task_spec,
            label_scheme,
            model,
        }
    }

    pub fn iteration(&self) -> usize {
        match &self.model {
            Model::Hierarchical(s) => s.iteration,
            Model::Flat(s) => s.iteration,
        }
    }

    /// Option count of the policy; flat policies count as one option.
    pub fn k(&self) -> usize {
        match &self.model {
            Model::Hierarchical(s) => s.config.k,
            Model::Flat(_) => 1,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| Error::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::format(path, e.to_string()))?;
        let probe: VersionProbe =
            serde_json::from_value(value.clone()).map_err(|e| Error::format(path, e.to_string()))?;
        if probe.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Version {
                found: probe.format_version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| Error::format(path, e.to_string()))
    }
}
