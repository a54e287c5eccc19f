use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-positive rate level {value} at index {index}")]
    NonPositiveLevel { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("likelihood contribution underflowed at observation {index}")]
    DegenerateObservation { index: usize },

    #[error("2^{levels} states exceeds the configured cap of 2^{cap}")]
    StateSpaceTooLarge { levels: usize, cap: usize },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
