use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum TassError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("regime-weight cache does not match the supplied parameters")]
    StaleCache,

    #[error("all importance weights underflowed at time {time}")]
    DegenerateWeights { time: usize },

    #[error("Hessian is singular or ill-conditioned (condition number {condition:.3e})")]
    SingularHessian { condition: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate timestamp {timestamp} at line {line}")]
    DuplicateTimestamp { line: usize, timestamp: String },

    #[error("week starting {0} has no observations")]
    EmptyWeek(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TassError {
    /// Process exit code: 1 for user errors, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            TassError::DegenerateWeights { .. }
            | TassError::SingularHessian { .. }
            | TassError::StaleCache => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, TassError>;
