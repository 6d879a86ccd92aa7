use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by the command line front-end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Algorithm,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("cannot parse {value:?} at row {row}, column {column:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("no labeled voxels in training mask")]
    NoLabels,

    #[error("class {id} ({name}) has no labeled voxels")]
    MissingClass { id: u8, name: String },

    #[error("non-finite training loss at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },

    #[error("porosity target {target} not reached: achieved {achieved}")]
    Porosity { target: f64, achieved: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{algorithm}: {source}")]
    Algorithm {
        algorithm: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wraps an error with the name of the algorithm that raised it.
    pub fn tagged(self, algorithm: impl Into<String>) -> Self {
        Error::Algorithm {
            algorithm: algorithm.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Unsupported(_) => ErrorKind::Config,
            Error::NonFiniteLoss { .. } | Error::Algorithm { .. } => ErrorKind::Algorithm,
            _ => ErrorKind::Data,
        }
    }
}
