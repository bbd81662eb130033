use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration text or values. `key` is a dotted path.
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] gmc::Error),
}

impl CliError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for data and format problems, 4 for
    /// numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Format { .. } | CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                gmc::Error::InvalidConfig { .. } => 2,
                gmc::Error::NonFiniteLoss { .. } | gmc::Error::DegenerateVector { .. } => 4,
                _ => 3,
            },
        }
    }
}
