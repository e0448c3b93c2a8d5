use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data config: {0}")]
    DataConfig(String),

    #[error("invalid model config: {0}")]
    ModelConfig(String),

    #[error("unknown class {class} (bank has {k})")]
    UnknownClass { class: usize, k: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite activation at layer {layer}")]
    NonFinite { layer: usize },

    #[error("loss diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Core(#[from] posbias_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
