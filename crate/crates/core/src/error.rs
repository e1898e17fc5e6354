use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure category, used for process exit codes and the C error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Solver,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("patch too small: {0}")]
    PatchTooSmall(String),

    #[error("invalid edge ({0}, {1}): {2}")]
    InvalidEdge(usize, usize, String),

    #[error("oracle too large: {0}")]
    OracleTooLarge(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(
        "calibration degenerate: only one class present (fallback alpha={alpha}, beta={beta})"
    )]
    CalibrationDegenerate { alpha: f64, beta: f64 },

    #[error("unknown label: {0}")]
    UnknownLabel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("failed to load {path}: {message}")]
    Load { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::UnknownLabel(_) => ErrorKind::Config,
            Error::OracleTooLarge(_) | Error::CalibrationDegenerate { .. } => ErrorKind::Solver,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        Error::MalformedInput(msg.into())
    }
}
