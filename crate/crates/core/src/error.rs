use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HgamError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HgamError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario infeasible: could not place {what} after {attempts} attempts")]
    ScenarioInfeasible { what: &'static str, attempts: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("checkpoint error ({path}): {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HgamError {
    pub fn contract(msg: impl Into<String>) -> Self {
        HgamError::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        HgamError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HgamError::Io { path: path.into(), source }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            HgamError::Config(_) | HgamError::ScenarioInfeasible { .. } => 2,
            HgamError::Checkpoint { .. } | HgamError::Shape { .. } => 3,
            HgamError::Contract(_) | HgamError::UndefinedMetric(_) | HgamError::Io { .. } => 4,
        }
    }
}
