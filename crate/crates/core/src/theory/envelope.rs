//! Per-layer attention envelopes with explicit constants.

use ndarray::ArrayView2;
use serde::Serialize;

use crate::attention::AttentionMap;
use crate::error::{Error, Result};
use crate::export::SCHEMA_VERSION;

/// Relative slack applied to both sides of an envelope comparison.
pub const ENVELOPE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnvelopeRegime {
    Decay,
    Rope,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeEntry {
    /// 1-based row and column.
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub schema: u32,
    pub regime: EnvelopeRegime,
    pub logit_min: f64,
    pub logit_max: f64,
    pub c_min_proof: f64,
    pub c_max_proof: f64,
    /// Decay only: upper constant for row 1, whose normalizer has a single term.
    pub c_max_first_row: Option<f64>,
    /// Rate in the lower envelope (`m`, or `c` with `e^{-c x² θ²}`).
    pub rate_lower: f64,
    /// Rate in the upper envelope (`m`, or `c'`).
    pub rate_upper: f64,
    /// RoPE only: `c` in `cos x <= 1 - x²/c` on `|x| <= π`.
    pub cosine_constant: Option<f64>,
    pub entries: Vec<EnvelopeEntry>,
    pub violations: usize,
}

impl EnvelopeReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }

    pub fn first_violation(&self) -> Option<&EnvelopeEntry> {
        self.entries.iter().find(|e| !e.pass)
    }
}

pub(crate) fn within(value: f64, lower: f64, upper: f64) -> bool {
    value >= lower * (1.0 - ENVELOPE_SLACK) && value <= upper * (1.0 + ENVELOPE_SLACK)
}

/// Checks that `map` has exactly causal support.
pub(crate) fn ensure_causal(map: ArrayView2<f64>) -> Result<()> {
    let n = map.nrows();
    if map.ncols() != n {
        return Err(Error::Shape(format!("attention map is {}x{}", n, map.ncols())));
    }
    for i in 0..n {
        for j in 0..n {
            let v = map[[i, j]];
            if (j > i && v != 0.0) || (j <= i && !(v > 0.0)) {
                return Err(Error::InvalidMask("mask not causal".into()));
            }
        }
    }
    Ok(())
}

/// Checks `C_min e^{-(i-j)m} <= A_ij <= C_max e^{-(i-j)m}` with
/// `C_max = e^{ΔI}/(1+e^{-m})`, `C_min = (1-e^{-m}) e^{-ΔI}`.
///
/// Row 1 has `A_11 = 1` while its normalizer holds one term, so the
/// two-term bound behind `C_max` does not apply there; that row is
/// checked against `e^{ΔI}` instead.
pub fn decay_envelope_check(map: &AttentionMap, z_pre_decay: ArrayView2<f64>, m: f64) -> Result<EnvelopeReport> {
    let n = map.n();
    if z_pre_decay.dim() != (n, n) {
        return Err(Error::Shape(format!("logits are {:?}, map is {n}x{n}", z_pre_decay.dim())));
    }
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidPe(format!("decay rate must be positive, got {m}")));
    }
    ensure_causal(map.view())?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..=i {
            lo = lo.min(z_pre_decay[[i, j]]);
            hi = hi.max(z_pre_decay[[i, j]]);
        }
    }
    let spread = hi - lo;
    let c_max = spread.exp() / (1.0 + (-m).exp());
    let c_min = -(-m).exp_m1() * (-spread).exp();
    let c_first = spread.exp();

    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            let scale = (-((i - j) as f64) * m).exp();
            let upper = if i == 0 { c_first } else { c_max } * scale;
            let lower = c_min * scale;
            let value = map.get(i, j);
            entries.push(EnvelopeEntry { i: i + 1, j: j + 1, value, lower, upper, pass: within(value, lower, upper) });
        }
    }
    let violations = entries.iter().filter(|e| !e.pass).count();
    Ok(EnvelopeReport {
        schema: SCHEMA_VERSION,
        regime: EnvelopeRegime::Decay,
        logit_min: lo,
        logit_max: hi,
        c_min_proof: c_min,
        c_max_proof: c_max,
        c_max_first_row: Some(c_first),
        rate_lower: m,
        rate_upper: m,
        cosine_constant: None,
        entries,
        violations,
    })
}
