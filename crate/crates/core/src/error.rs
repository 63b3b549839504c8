use thiserror::Error;

use crate::family::ConvergenceReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value {value} at cell {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular elliptic system: population has zero mass, the Neumann operator has constants in its kernel")]
    SingularSystem,

    #[error("positivity violation: u[{cell}] = {value:e} after step")]
    PositivityViolation { cell: usize, value: f64 },

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory for eps = {eps} failed: {source}")]
    Family {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario key `{key}`: {message}")]
    Scenario { key: String, message: String },

    #[error("hypothesis ({which}) violated: {message}")]
    Hypothesis {
        which: &'static str,
        message: String,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("epsilon family is not converging; limit extraction refused")]
    NotConverging(Box<ConvergenceReport>),

    #[error("test function violates support condition: {0}")]
    Support(String),
}

impl Error {
    /// Time at which a trajectory failed, if the error carries one.
    pub fn failing_time(&self) -> Option<f64> {
        match self {
            Error::AtTime { t, .. } => Some(*t),
            Error::Family { source, .. } => source.failing_time(),
            _ => None,
        }
    }

    /// Regularization parameter of the trajectory that failed, if any.
    pub fn failing_eps(&self) -> Option<f64> {
        match self {
            Error::Family { eps, .. } => Some(*eps),
            Error::AtTime { source, .. } => source.failing_eps(),
            _ => None,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::PositivityViolation { .. } | Error::SingularSystem | Error::NonFinite { .. } => {
                true
            }
            Error::AtTime { source, .. } | Error::Family { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
