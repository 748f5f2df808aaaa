use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: malformed file: {message}")]
    Format { path: String, message: String },

    #[error("{path}: line {line}, column {column} ({column_name}): cannot parse {value:?} as a finite real")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        column_name: String,
        value: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("sample ids do not align across views: {}", .offending.join(", "))]
    Alignment { offending: Vec<String> },

    #[error("label error: {0}")]
    Label(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error(
        "SMO did not converge after {iterations} iterations (max KKT violation {max_violation:e})"
    )]
    Convergence {
        iterations: usize,
        max_violation: f64,
    },

    #[error("stratification failed: {0}")]
    Stratification(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: cannot decode image: {message}", .path.display())]
    Image { path: PathBuf, message: String },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 for bad input, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format { .. }
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Alignment { .. }
            | Error::Label(_)
            | Error::Parameter(_)
            | Error::DimensionMismatch { .. }
            | Error::Stratification(_) => 1,
            Error::Training(_)
            | Error::Convergence { .. }
            | Error::Io { .. }
            | Error::Image { .. }
            | Error::Serde(_) => 2,
        }
    }
}
