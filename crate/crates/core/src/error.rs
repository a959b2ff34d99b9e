use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Parameters are valid but the requested computation is out of reach
    /// (for example exhaustive enumeration above its cap).
    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("secret oracle exhausted: {requested} more instances requested after {drawn} of {budget} ({context})")]
    OracleExhausted {
        drawn: u64,
        requested: u64,
        budget: u64,
        context: String,
    },

    #[error("distribution is not normalized (total mass {0})")]
    Unnormalized(f64),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}
