use thiserror::Error;

/// Errors raised by the walk, estimation and coupling routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid jump distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid cookie environment: {0}")]
    InvalidEnvironment(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time {t} out of bounds for horizon {horizon}")]
    OutOfBounds { t: usize, horizon: usize },

    #[error("insufficient renewals: need at least {needed} cut times, found {found}")]
    InsufficientRenewals { needed: usize, found: usize },

    #[error("non-unit increment {increment} at step {step}")]
    NonUnitIncrement { step: usize, increment: i64 },

    #[error("no frontier: condition does not change sign on [0, 1]")]
    NoFrontier,

    #[error("coupling violation at index {index}: {detail}")]
    CouplingViolation { index: String, detail: String },

    #[error("hypothesis violation at step {step}: {detail}")]
    HypothesisViolation { step: usize, detail: String },

    #[error("trigger record is censored")]
    Censored,

    #[error("malformed record: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
