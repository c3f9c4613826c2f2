use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability {0} is outside (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("density is not differentiable at x = {0}")]
    NotDifferentiable(f64),

    #[error("moment does not exist: {0}")]
    MomentUndefined(String),

    #[error("distribution has infinite mean")]
    InfiniteMean,

    #[error("no closed-form modile for {0}")]
    NoClosedForm(String),

    #[error("closed-form validity condition violated: {0}")]
    ValidityViolated(String),

    /// No sign change of the first-order condition was found in the scan
    /// window; `fallback` is the grid point with the smallest expected loss.
    #[error("no stationary point found in scan window; grid minimiser {fallback} is not stationary")]
    NoSignChange { fallback: f64 },

    #[error("sample must contain at least {required} observations, got {got}")]
    SampleTooSmall { required: usize, got: usize },

    #[error("sample of size {got} exceeds the brute-force limit {max}")]
    SampleTooLarge { got: usize, max: usize },

    #[error("non-finite observation at index {0}")]
    NonFinite(usize),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("zero denominator in ratio: {0}")]
    ZeroDenominator(String),

    #[error("degenerate asymptotics: {0}")]
    DegenerateAsymptotics(String),

    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tau = {tau} must lie in (0, 1)")))
    }
}
