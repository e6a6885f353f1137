use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command-line tool, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] vecuq_core::Error),
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Input {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for bad input, 2 for numerical failures inside the library.
    pub fn exit_code(&self) -> i32 {
        use vecuq_core::Error as E;
        match self {
            Self::Core(E::NonFinite(_) | E::NotPositiveDefinite(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
