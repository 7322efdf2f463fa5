use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T> = std::result::Result<T, CarmaError>;

#[derive(Debug, Error)]
pub enum CarmaError {
    #[error("malformed orders: need p >= 1 and 0 <= q < p, got p = {p}, q = {q}")]
    InvalidOrders { p: usize, q: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("roots are not closed under complex conjugation")]
    NotConjugateClosed,

    #[error("model violates its assumptions: {0}")]
    InvalidModel(ValidationReport),

    #[error("operation requires distinct autoregressive roots")]
    DistinctRootsRequired,

    #[error("model is not invertible; use the exact spectral factorization instead")]
    NotInvertible,

    #[error("spectral factor has a root on the unit circle (modulus {modulus})")]
    NonInvertibleLimit { modulus: f64 },

    #[error("covariance sequence has negative spectrum (minimum {min_spectrum:e})")]
    InvalidCovariance { min_spectrum: f64 },

    #[error("MA polynomial is not minimum-phase (smallest root modulus {min_modulus})")]
    NotMinPhase { min_modulus: f64 },

    #[error("expected {expected} roots, found {found}")]
    RootCount { expected: usize, found: usize },

    #[error("filtered covariance is not {lags}-dependent: relative residual {residual:e}")]
    DependenceCheck { lags: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numeric(String),
}
