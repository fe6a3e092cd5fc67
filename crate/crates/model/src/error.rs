use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("invalid character {ch:?} at position {pos} in sequence")]
    InvalidSequence { ch: char, pos: usize },
    #[error("training diverged at epoch {epoch}: {what}")]
    Divergence { epoch: usize, what: String },
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("geometry: {0}")]
    Geometry(#[from] hge_core::GeometryError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
