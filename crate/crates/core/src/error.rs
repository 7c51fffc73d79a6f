use crate::rational::ParseRationalError;

/// Broad classes of failure, used by the command line to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or invariant-violating input.
    Input,
    /// A configured size cap would be exceeded.
    Cap,
    /// An internal invariant was broken; always a bug.
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Parse(#[from] ParseRationalError),
    #[error("{context}: {message}")]
    Format { context: String, message: String },
    #[error("matrix shape: {0}")]
    Shape(String),
    #[error("metric {metric_id:?} is invalid: {}", summarize(violations))]
    InvalidMetric {
        metric_id: String,
        violations: Vec<crate::metric::Violation>,
    },
    #[error("metric {0:?} is not an ultrametric")]
    NotUltrametric(String),
    #[error("point index {index} out of range for {n} points")]
    PointIndex { index: usize, n: usize },
    #[error("{0}")]
    Precondition(String),
    #[error("point sets differ between {0:?} and {1:?}")]
    PointSetMismatch(String, String),
    #[error("duplicate metric id {0:?}")]
    DuplicateMetric(String),
    #[error("unknown metric id {0:?}")]
    UnknownMetric(String),
    #[error("{what} is {actual}, above the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        actual: u128,
        cap: u128,
    },
    #[error("internal invariant broken: {0}")]
    Internal(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn summarize(violations: &[crate::metric::Violation]) -> String {
    let shown: Vec<String> = violations.iter().take(3).map(|v| v.to_string()).collect();
    let more = violations.len().saturating_sub(shown.len());
    if more > 0 {
        format!("{} (and {more} more)", shown.join("; "))
    } else {
        shown.join("; ")
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::CapExceeded { .. } => ErrorClass::Cap,
            Error::Internal(_) => ErrorClass::Internal,
            _ => ErrorClass::Input,
        }
    }

    pub fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
