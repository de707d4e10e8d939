use thiserror::Error;

/// Errors raised by the numerical kernels and the scenario loader.
///
/// The `Display` form always starts with the variant name so that callers
/// (and the CLI) can match on it textually.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("SingularOperator: pivot {pivot:.3e} below threshold {threshold:.3e}")]
    SingularOperator { pivot: f64, threshold: f64 },

    #[error("NonFiniteInput: {0}")]
    NonFiniteInput(String),

    #[error("NonFiniteValue: integrand returned a non-finite sample at t = {0}")]
    NonFiniteValue(f64),

    #[error("InvalidInterval: lower limit {a} exceeds upper limit {b}")]
    InvalidInterval { a: f64, b: f64 },

    #[error("ExcessiveHorizon: t = {t} exceeds {max_knots} delay intervals of length {tau}")]
    ExcessiveHorizon { t: f64, tau: f64, max_knots: usize },

    #[error("DomainError: {0}")]
    DomainError(String),

    #[error("SmoothnessError: {0}")]
    SmoothnessError(String),

    #[error("OutOfHorizon: t = {t} outside [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("GridMismatch: step {h} does not divide segment length {segment}")]
    GridMismatch { h: f64, segment: f64 },

    #[error("SlopeUndefined: need at least 3 tau values for slope, got {0}")]
    SlopeUndefined(usize),

    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
