use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("target column '{0}' not found in header")]
    MissingTarget(String),

    #[error("non-numeric value {value:?} at row {row}, column '{column}'")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("column '{0}' has zero variance")]
    ZeroVariance(String),

    #[error("classification target must be 0 or 1, found {value} at row {row}")]
    InvalidLabel { row: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset is not standardized (column '{0}')")]
    NotStandardized(String),

    #[error("task mismatch: operation requires a {expected} dataset")]
    TaskMismatch { expected: &'static str },

    #[error("non-finite value encountered in sweep {sweep}")]
    NonFinite { sweep: usize },

    #[error("class {class} absent from training folds of fold {fold}")]
    ClassAbsent { fold: usize, class: u8 },

    #[error("coordinate index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("support of the true coefficient vector is empty")]
    EmptySupport,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { what, expected, got }
    }
}
