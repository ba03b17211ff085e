use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("coefficient document: {0}")]
    Parse(String),

    #[error("drift removal on an unbounded domain requires localization first")]
    LocalizationRequired,

    #[error("quadrature did not converge on [{lo}, {hi}] (estimated error {estimate:e})")]
    Quadrature { lo: f64, hi: f64, estimate: f64 },

    #[error("series did not converge within {terms} terms (t = {t}, x = {x})")]
    SeriesDivergence { terms: usize, t: f64, x: f64 },

    #[error("conditioning on an event of zero probability: {0}")]
    NullEvent(String),

    #[error("inverse-CDF solve failed after {iterations} iterations (residual {residual:e})")]
    Inversion { iterations: usize, residual: f64 },

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("step budget of {0} exceeded")]
    StepBudget(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
