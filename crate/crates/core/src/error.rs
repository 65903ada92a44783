use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected}, got {got}")]
    InputShape { expected: usize, got: usize },

    #[error("parameter shape mismatch: {0}")]
    ParamShape(String),

    #[error("backward called without a recorded forward pass")]
    NoRecordedForward,

    #[error("index {index} out of range for {len} classes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("trajectory {0} carries annotated labels and cannot be relabeled")]
    Immutable(usize),

    #[error("trajectory {0} has no option labels; segment before sampling")]
    StaleLabels(usize),

    #[error("cannot sample from an empty {0} source")]
    EmptySource(&'static str),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("label scheme mismatch: {0}")]
    Scheme(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Scheme(_) => 2,
            Error::Validation(_)
            | Error::Immutable(_)
            | Error::StaleLabels(_)
            | Error::EmptySource(_)
            | Error::Version { .. }
            | Error::Format { .. }
            | Error::Io { .. }
            | Error::Csv(_) => 3,
            _ => 4,
        }
    }
}
