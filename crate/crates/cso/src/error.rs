//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants onto exit codes: config errors exit with 2,
/// failed statistical assertions with 3, infeasible instances with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("instance cap exceeded: {requested} items > cap {cap}")]
    CapExceeded { requested: u128, cap: u64 },

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("budget exhausted: all {budget} observations already spent")]
    BudgetExhausted { budget: usize },

    #[error("point outside [0,1]^d: {0}")]
    OutOfDomain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("assertion failed: {0}")]
    AssertionFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code used by the CLI for this error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Json(_) => 2,
            Error::AssertionFailed(_) => 3,
            Error::Infeasible(_) | Error::CapExceeded { .. } => 4,
            _ => 1,
        }
    }
}
