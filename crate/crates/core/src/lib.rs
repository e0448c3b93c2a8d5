//! Multi-layer masked attention as a numerical object.
//!
//! Attention masks are directed graphs ([`mask`]); stacking masked softmax
//! layers ([`attention`]) yields cumulative rollout distributions
//! ([`rollout`]) whose limiting behaviour and positional envelopes are
//! checked in [`theory`].

pub mod attention;
pub mod error;
pub mod export;
pub mod linalg;
pub mod mask;
pub mod rollout;
pub mod seed;
pub mod theory;

pub use attention::{
    apply_decay, init_stack, layer_forward, masked_softmax, raw_scores, rope_rotate,
    sinusoidal_pe, AttentionMap, LayerStack, LayerWeights, PeMode, RopeAngles,
};
pub use error::{Error, Result};
pub use mask::{MaskGraph, MaskKind};
pub use rollout::{rollout, rollout_scaled, RolloutTrace};
