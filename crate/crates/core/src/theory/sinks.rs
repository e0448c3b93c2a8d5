//! Attention-sink scores.

use serde::Serialize;

use crate::attention::AttentionMap;
use crate::error::{Error, Result};
use crate::export::SCHEMA_VERSION;
use crate::mask::MaskGraph;

pub const DEFAULT_SINK_TAU: f64 = 0.2;

#[derive(Debug, Clone, Serialize)]
pub struct SinkReport {
    pub schema: u32,
    pub tau: f64,
    pub depth: usize,
    /// `s_j`, indexed by 0-based column (token `j + 1`).
    pub scores: Vec<f64>,
    pub column_counts: Vec<usize>,
}

impl SinkReport {
    /// 1-based tokens sorted by decreasing score (ties by position).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx.into_iter().map(|i| i + 1).collect()
    }
}

/// `s_j = (1/T) Σ_t (1/Σ_i M_ij) Σ_i 1{A^(t)_ij > τ}`.
pub fn attention_sink_metric(maps: &[AttentionMap], g: &MaskGraph, tau: f64) -> Result<SinkReport> {
    if maps.is_empty() {
        return Err(Error::InvalidArgument("empty map list".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1], got {tau}")));
    }
    let n = g.n();
    if maps.iter().any(|m| m.n() != n) {
        return Err(Error::Shape(format!("maps must be {n}x{n}")));
    }
    let counts = g.column_counts();
    let mut scores = vec![0.0; n];
    for map in maps {
        for (j, s) in scores.iter_mut().enumerate() {
            let hits = (0..n).filter(|&i| g.allows(i, j) && map.get(i, j) > tau).count();
            *s += hits as f64 / counts[j] as f64;
        }
    }
    let depth = maps.len();
    scores.iter_mut().for_each(|s| *s /= depth as f64);
    Ok(SinkReport { schema: SCHEMA_VERSION, tau, depth, scores, column_counts: counts })
}

/// Element-wise mean of several reports over the same mask and depth.
pub fn mean_sink_report(reports: &[SinkReport]) -> Result<SinkReport> {
    let first = reports.first().ok_or_else(|| Error::InvalidArgument("no sink reports".into()))?;
    if reports.iter().any(|r| r.scores.len() != first.scores.len()) {
        return Err(Error::Shape("sink reports differ in length".into()));
    }
    let mut scores = vec![0.0; first.scores.len()];
    for r in reports {
        scores.iter_mut().zip(&r.scores).for_each(|(a, b)| *a += b);
    }
    scores.iter_mut().for_each(|s| *s /= reports.len() as f64);
    Ok(SinkReport { scores, ..first.clone() })
}
