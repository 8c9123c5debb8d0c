use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the change-surface library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),

    #[error("non-numeric value {value:?} at line {line}")]
    NonNumeric { line: usize, value: String },

    #[error("no data rows in {0}")]
    EmptyFile(PathBuf),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPsd { pivot: usize },

    #[error("problem size {size} exceeds dense cap {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("non-positive eigenvalue bound at index {0} with zero noise")]
    NonPositive(usize),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("regime {regime} dominates no usable grid line along dimension {dim}")]
    EmptyRegime { regime: usize, dim: usize },

    #[error("degenerate denominator in {0}")]
    DegenerateDenominator(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
