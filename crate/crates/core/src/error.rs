use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("position {pos} out of range 1..={n}")]
    PositionOutOfRange { pos: usize, n: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid positional encoding: {0}")]
    InvalidPe(String),

    #[error("dimension {0} is odd; this encoding needs an even dimension")]
    OddDimension(usize),

    #[error("binomial({t}+{x}, {x}) does not fit in u128")]
    PathCountOverflow { t: u64, x: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value produced at layer {layer}")]
    NonFinite { layer: usize },

    #[error("no root bracketed in [{lo:e}, {hi:e}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
