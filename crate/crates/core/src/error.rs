use thiserror::Error;

/// Errors raised by the reserving engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trend saturated: transformed time {requested} is not below the total mass {limit}")]
    Saturated { requested: f64, limit: f64 },

    #[error("hazard diverges: survival function is zero at transformed age {age}")]
    Divergence { age: f64 },

    #[error("degenerate truncation window ({lower}, {upper}]: base distribution has no mass there")]
    DegenerateWindow { lower: f64, upper: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient data: got {got}, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("did not converge after {iterations} iterations: {message}")]
    NonConvergence { iterations: usize, message: String, best_objective: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("rejection budget of {budget} draws exhausted for claim {claim}")]
    RejectionBudget { claim: usize, budget: usize },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("negative variance {variance} exceeds the quadrature noise allowance")]
    NegativeVariance { variance: f64 },

    #[error("quadrature routes disagree: cell sum {cells} vs window integral {window}")]
    QuadratureMismatch { cells: f64, window: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
