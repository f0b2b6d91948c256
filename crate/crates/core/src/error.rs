use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown point id {0}")]
    UnknownPoint(usize),
    #[error("unknown agent id {0}")]
    UnknownAgent(usize),
    #[error("unknown candidate id {0}")]
    UnknownCandidate(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(
        "enumeration would visit {subsets} subsets (limit {limit}); use a smaller instance or a tighter size cap"
    )]
    EnumerationTooLarge { subsets: u128, limit: u128 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
