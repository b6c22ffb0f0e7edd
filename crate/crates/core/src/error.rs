use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure at t = {t}: {reason}")]
    NumericalFailure { t: f64, reason: String },
    #[error("positivity failure at t = {t}: minimum eigenvalue {min_eigenvalue:e}")]
    PositivityFailure { t: f64, min_eigenvalue: f64 },
    #[error("singular expression: {0}")]
    Singularity(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("optimization failure: {0}")]
    OptimizationFailure(String),
}
