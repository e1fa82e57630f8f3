use std::path::PathBuf;

use crate::numerics::NumericsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation error at step {step}: {reason}")]
    Simulation { step: usize, reason: String },
    #[error("parse error in {source_name} at row {row}: {reason}")]
    Parse { source_name: String, row: usize, reason: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("optimizer error: {0}")]
    Optimizer(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Errors the operator can fix by changing inputs, as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}
