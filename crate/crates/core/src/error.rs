use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("encoder construction failed after {retries} resamples (worst condition estimate {condition:e})")]
    IllConditionedEncoder { retries: usize, condition: f64 },

    #[error("decoder submatrix B(I,:) is singular for surviving set I = {subset:?}")]
    SingularSubmatrix { subset: Vec<usize> },

    #[error("measurement matrix is rank deficient (smallest/largest eigenvalue ratio {ratio:e}); regenerate with a new seed")]
    RankDeficient { ratio: f64 },

    #[error("server graph is disconnected")]
    Disconnected,

    #[error("{0}")]
    Precondition(String),

    #[error("trace length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("configuration is invalid:\n{}", .0.join("\n"))]
    Validation(Vec<String>),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
