use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum FockError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge on [{a}, {b}] within {depth} refinement levels")]
    QuadratureNonConvergence { a: f64, b: f64, depth: usize },

    #[error("point {0} lies outside the trust radius {1:.4}")]
    TrustRadius(String, f64),

    #[error("operation requires the classical weight: {0}")]
    NotClassical(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("Gram matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NonPsdGram(f64),

    #[error("heat time t = {t} is below the grid resolution (spacing {spacing})")]
    HeatResolution { t: f64, spacing: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FockError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(FockError::InvalidParameter(msg.into()))
}
