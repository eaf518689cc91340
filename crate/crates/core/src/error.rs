use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("spectral field is not Hermitian-symmetric: {0}")]
    SymmetryViolation(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("time interval not covered: {0}")]
    NotCovered(String),
    #[error("time step collapsed below floor at t={t}: dt={dt}")]
    StepFloor { t: f64, dt: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{0} did not converge: {1}")]
    NoConvergence(&'static str, String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
