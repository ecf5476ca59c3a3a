use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error at record {index}: {message}")]
    Ingest { index: usize, message: String },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("empty cell for component {0}")]
    EmptyCell(usize),

    #[error("non-finite value at step {step}, point {index}")]
    NonFinite { step: usize, index: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
