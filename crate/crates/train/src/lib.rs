//! Synthetic in-context retrieval data and a small trainable attention
//! classifier with hand-written gradients.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod model;
pub mod optim;
pub mod trainer;

pub use error::{Error, Result};
