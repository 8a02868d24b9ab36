use std::path::PathBuf;

use thiserror::Error;

use crate::qp::QpStatus;
use crate::task_model::PriorityViolation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid task {id}: {reason}")]
    InvalidTask { id: u32, reason: String },

    #[error("invalid constraint {id}: {reason}")]
    InvalidConstraint { id: u32, reason: String },

    #[error("invalid priority matrix: {0}")]
    Priority(PriorityViolation),

    #[error("strict baseline requires a binary priority matrix (level {level}, task column {task}: {value})")]
    NonBinaryPriority { level: usize, task: usize, value: f64 },

    #[error("rank deficiency in QR of retained rows (|R[{index},{index}]| = {diag:e})")]
    RankMismatch { index: usize, diag: f64 },

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("QP at level {level} failed: {status:?} after {iterations} iterations ({detail})")]
    Qp {
        level: usize,
        status: QpStatus,
        iterations: usize,
        detail: String,
    },

    #[error("QP Hessian is not positive definite")]
    NotPositiveDefinite,

    #[error("singular value decomposition did not converge")]
    Svd,

    #[error("proportions must be non-negative and sum to 1 (sum = {sum})")]
    Proportions { sum: f64 },

    #[error("unknown schedule event `{0}`")]
    UnknownEvent(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("solver failed at cycle {cycle} (t = {time:.4} s): {source}")]
    Cycle {
        cycle: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("log mismatch: {0}")]
    LogShape(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Short category tag, used for CLI exit codes and the C error codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Dimension(_) | Error::IndexOutOfRange { .. } | Error::LogShape(_) => {
                ErrorCategory::Dimension
            }
            Error::InvalidTask { .. }
            | Error::InvalidConstraint { .. }
            | Error::Priority(_)
            | Error::NonBinaryPriority { .. }
            | Error::Proportions { .. }
            | Error::UnknownEvent(_) => ErrorCategory::Invalid,
            Error::RankMismatch { .. } | Error::Qp { .. } | Error::NotPositiveDefinite | Error::Svd => {
                ErrorCategory::Solver
            }
            Error::Cycle { source, .. } => source.category(),
            Error::Config(_) => ErrorCategory::Config,
            Error::Io { .. } | Error::Csv { .. } => ErrorCategory::Io,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Dimension,
    Invalid,
    Solver,
    Config,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Invalid => 3,
            ErrorCategory::Dimension => 4,
            ErrorCategory::Solver => 5,
            ErrorCategory::Io => 6,
        }
    }
}
