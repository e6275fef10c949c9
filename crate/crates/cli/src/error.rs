use std::path::PathBuf;

use gsanatomy::Error as CoreError;
use thiserror::Error;

/// Failures split by exit code: input problems (2) and everything else (1).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Input { path: PathBuf, source: CoreError },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("stale stratification: {0}")]
    Stale(String),

    #[error("{0}")]
    Invalid(CoreError),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. }
            | CliError::Input { .. }
            | CliError::Config(_)
            | CliError::Malformed { .. }
            | CliError::Stale(_)
            | CliError::Invalid(_) => 2,
            CliError::Internal(_) | CliError::Write { .. } => 1,
        }
    }
}

/// Analysis errors caused by the data are input errors; the rest are ours.
impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::TooFewSamples { .. }
            | CoreError::DegenerateData(_)
            | CoreError::CloudTooSmall { .. }
            | CoreError::InvalidArgument(_)
            | CoreError::InvalidPrimitive(_) => CliError::Invalid(e),
            other => CliError::Internal(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
