use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures surfaced by the IO layer, the pipeline and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    /// Malformed or inconsistent input data.
    #[error("{0}")]
    Data(String),

    /// Invalid configuration or arguments.
    #[error("{0}")]
    Validation(String),

    #[error("capacity: {0}")]
    Capacity(String),

    #[error("{path}: bad {what} file: {message}")]
    Format { path: PathBuf, what: &'static str, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: &'static str, source: Box<Error> },

    #[error(transparent)]
    Core(#[from] rrgcn_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// 2 for invalid configuration, 3 for capacity refusals, 4 for bad data, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use rrgcn_core::Error as C;
        match self {
            Error::Validation(_) => 2,
            Error::Capacity(_) => 3,
            Error::Parse { .. } | Error::Data(_) | Error::Format { .. } | Error::Io { .. } => 4,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Core(c) => match c {
                C::Capacity { .. } | C::Overflow(_) => 3,
                C::DimensionMismatch { .. } | C::InvalidInput(_) => 2,
                C::Diverged { .. } => 1,
            },
        }
    }
}
