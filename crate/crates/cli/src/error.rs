use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("assumptions violated: {}", .0.join("; "))]
    Assumption(Vec<String>),
    #[error("{0}")]
    Capacity(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assumption(_) | CliError::Verification(_) => 1,
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Capacity(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<robustinfo::Error> for CliError {
    fn from(e: robustinfo::Error) -> Self {
        match e {
            robustinfo::Error::Capacity { .. } => CliError::Capacity(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}
