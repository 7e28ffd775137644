use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the diversity, ingestion, sampling and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a type invariant (normalization, dimensions, labels, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A numeric argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A manifest row could not be turned into an image.
    #[error("ingestion error at row {row} ({path}): {message}")]
    Ingestion { row: usize, path: PathBuf, message: String },

    /// A cache or data file is malformed.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// The requested composition cannot satisfy the per-class caps.
    #[error("infeasible composition: {0}")]
    Infeasible(String),

    /// R² is undefined because the response has zero variance.
    #[error("R² undefined for metric `{metric}`: response has zero variance")]
    UndefinedR2 { metric: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
