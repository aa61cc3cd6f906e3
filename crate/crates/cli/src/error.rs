use std::path::PathBuf;

use snn_lab_core::mnist::LoadError;
use thiserror::Error;

use crate::checkpoint::CheckpointError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing MNIST data: expected {}", .0.display())]
    MissingData(PathBuf),
    #[error("bad model file: {0}")]
    BadModel(#[from] CheckpointError),
    #[error(transparent)]
    Data(LoadError),
    #[error(transparent)]
    Core(#[from] snn_lab_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingData(_) => 3,
            CliError::BadModel(_) => 4,
            _ => 1,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Missing(p) => CliError::MissingData(p),
            other => CliError::Data(other),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(format!("csv: {e}"))
    }
}
