use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{operation} is not supported by this feasible set")]
    Unsupported { operation: &'static str },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    PowerIteration { iterations: usize, residual: f64 },

    #[error("declared Slater point is not strictly feasible: constraint {constraint} has H = {value:e}")]
    SlaterViolated { constraint: usize, value: f64 },

    #[error("run aborted at iteration {iteration}: {reason}")]
    NumericAbort { iteration: usize, reason: String },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures caused by the numerics of a run rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::PowerIteration { .. } | Error::NumericAbort { .. }
        )
    }
}
