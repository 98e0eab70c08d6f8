use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty configuration")]
    EmptyConfiguration,

    #[error("invalid features: {0}")]
    InvalidFeatures(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("segment index {index} out of range for {segments} segments")]
    InvalidSegment { index: usize, segments: usize },

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("unknown preset kind {0:?}")]
    UnknownPreset(String),

    #[error("task mismatch: model expects {expected}, data is {found}")]
    TaskMismatch { expected: String, found: String },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad input, paths or arguments. The rest signal a
    /// broken internal invariant.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::ShapeMismatch { .. }
                | Error::InvalidSegment { .. }
                | Error::NonScalarLoss(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
