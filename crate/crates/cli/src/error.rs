use std::io;
use std::path::{Path, PathBuf};

use harlstm::dataset_file::DatasetFileError;
use harlstm::eval::EvalError;
use harlstm::ingest::IngestError;
use harlstm::lstm::{CheckpointError, LstmError};
use harlstm::train::TrainError;
use harlstm::window::WindowError;
use harlstm::Scalar;
use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub const EXIT_USAGE: i32 = 1;
    pub const EXIT_DATA: i32 = 2;
    pub const EXIT_NUMERIC: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => Self::EXIT_USAGE,
            CliError::Data(_) | CliError::Io { .. } => Self::EXIT_DATA,
            CliError::Numeric(_) => Self::EXIT_NUMERIC,
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Prefixes a data error with the file it came from.
    pub fn in_file(path: &Path) -> impl FnOnce(CliError) -> CliError + '_ {
        move |e| match e {
            CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
            other => other,
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_errors!(IngestError, WindowError, DatasetFileError, LstmError, EvalError);

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io(source) => CliError::Data(format!("checkpoint: {source}")),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl<F: Scalar> From<TrainError<F>> for CliError {
    fn from(e: TrainError<F>) -> Self {
        match e {
            TrainError::InvalidConfig(msg) => CliError::Usage(msg),
            e @ TrainError::DivergedLoss { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}
