//! Cumulative attention products `P^(t) = A^(t) ⋯ A^(0)`.
//!
//! Row `i` of `P^(t)` is the distribution over input tokens that serve as
//! context for token `i` after `t + 1` layers.

use ndarray::{Array2, ArrayView2};

use crate::attention::{layer_forward_detailed, sinusoidal_pe, AttentionMap, LayerStack, PeMode};
use crate::error::{Error, Result};
use crate::mask::MaskGraph;

#[derive(Debug, Clone)]
pub struct RolloutTrace {
    pub maps: Vec<AttentionMap>,
    pub cumulative: Vec<Array2<f64>>,
    /// `X^(0) ..= X^(T+1)`; `X^(0)` includes the sinusoidal table when used.
    pub states: Vec<Array2<f64>>,
    /// Per-layer logits before any decay offset.
    pub scores: Vec<Array2<f64>>,
    /// Per-layer `X W_Q` / `X W_K` before rotation.
    pub queries: Vec<Array2<f64>>,
    pub keys: Vec<Array2<f64>>,
    pub pe: PeMode,
}

impl RolloutTrace {
    pub fn depth(&self) -> usize {
        self.maps.len()
    }

    pub fn n(&self) -> usize {
        self.maps.first().map_or(0, AttentionMap::n)
    }

    pub fn last(&self) -> &Array2<f64> {
        self.cumulative.last().expect("trace has at least one layer")
    }
}

pub fn rollout(
    x0: ArrayView2<f64>,
    stack: &LayerStack,
    g: &MaskGraph,
    pe: &PeMode,
) -> Result<RolloutTrace> {
    rollout_scaled(x0, stack, g, pe, 1.0)
}

/// Rollout with logits divided by `temperature`.
pub fn rollout_scaled(
    x0: ArrayView2<f64>,
    stack: &LayerStack,
    g: &MaskGraph,
    pe: &PeMode,
    temperature: f64,
) -> Result<RolloutTrace> {
    let (n, d) = x0.dim();
    if n != g.n() {
        return Err(Error::Shape(format!("x0 has {n} rows, mask has {} nodes", g.n())));
    }
    if stack.depth() == 0 {
        return Err(Error::InvalidArgument("empty layer stack".into()));
    }
    if stack.dim() != d {
        return Err(Error::Shape(format!("x0 has d={d}, stack has d={}", stack.dim())));
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be > 0, got {temperature}")));
    }
    pe.validate(d)?;

    let mut x = x0.to_owned();
    if matches!(pe, PeMode::Sinusoidal) {
        x += &sinusoidal_pe(n, d)?;
    }
    let depth = stack.depth();
    let mut trace = RolloutTrace {
        maps: Vec::with_capacity(depth),
        cumulative: Vec::with_capacity(depth),
        states: Vec::with_capacity(depth + 1),
        scores: Vec::with_capacity(depth),
        queries: Vec::with_capacity(depth),
        keys: Vec::with_capacity(depth),
        pe: pe.clone(),
    };
    let mut p = Array2::<f64>::eye(n);
    for (t, w) in stack.layers.iter().enumerate() {
        let out = layer_forward_detailed(x.view(), w, g, pe, temperature, t)?;
        p = out.map.0.dot(&p);
        trace.states.push(std::mem::replace(&mut x, out.next));
        trace.cumulative.push(p.clone());
        trace.maps.push(out.map);
        trace.scores.push(out.scores);
        trace.queries.push(out.queries);
        trace.keys.push(out.keys);
    }
    trace.states.push(x);
    Ok(trace)
}
