use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse-tree count {count} exceeds enumeration budget {budget}")]
    BudgetExceeded { count: String, budget: u64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("degenerate training data: {0}")]
    Degenerate(String),

    #[error("model verification failed: {0}")]
    VerificationFailed(String),

    #[error("malformed model file: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
