use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("construction: {0}")]
    Construction(String),

    #[error("placement: {0}")]
    Placement(String),

    #[error("next-nearest-neighbour path between {a} and {b}: {reason}")]
    NnnPath { a: usize, b: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scheduling: {0}")]
    Scheduling(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("detector D{id} failed verification: {reason}")]
    Detector { id: usize, reason: String },

    #[error("detector error model: {0}")]
    Dem(String),

    #[error("decode: {0}")]
    Decode(String),

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
