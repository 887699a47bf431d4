use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("data: {0}")]
    Data(String),
    #[error("tracking lost in {}", .0.join(", "))]
    TrackingLost(Vec<String>),
    #[error("external enhancer: {0}")]
    External(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } | Self::Data(_) => 3,
            Self::TrackingLost(_) => 4,
            Self::External(_) => 5,
        }
    }

    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.as_ref().to_path_buf();
        move |source| CliError::Io { path, source }
    }

    pub fn data(path: impl AsRef<Path>, what: impl std::fmt::Display) -> CliError {
        CliError::Data(format!("{}: {what}", path.as_ref().display()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
