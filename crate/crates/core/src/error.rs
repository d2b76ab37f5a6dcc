use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the optimization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("objective is not separable: {0}")]
    NotSeparable(String),

    #[error("estimator state missing: {0}")]
    MissingState(&'static str),

    #[error("unsupported region: {0}")]
    UnsupportedRegion(String),

    #[error("point is not in the feasible region")]
    Infeasible,

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
