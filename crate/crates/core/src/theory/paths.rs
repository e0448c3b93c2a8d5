//! Monotone path counts and the aggregate decay profile.

use ndarray::Array2;
use serde::Serialize;

use crate::attention::PeMode;
use crate::error::{Error, Result};
use crate::export::SCHEMA_VERSION;
use crate::rollout::RolloutTrace;
use crate::theory::envelope::{decay_envelope_check, ensure_causal};

/// Relative slack on the spread bound.
pub const SPREAD_SLACK: f64 = 1e-9;

/// `C(t+x, x)`: the number of non-decreasing index paths of `t+1` steps
/// covering a distance `x` in a causal graph.
pub fn monotone_path_count(t: u64, x: u64) -> Result<u128> {
    let overflow = || Error::PathCountOverflow { t, x };
    let k = x.min(t) as u128;
    let n = (t as u128).checked_add(x as u128).ok_or_else(overflow)?;
    let mut acc: u128 = 1;
    for i in 1..=k {
        // acc * (n-k+i) / i stays integral at every step.
        let num = n - k + i;
        let g = gcd(acc, i);
        let (a, d) = (acc / g, i / g);
        let f = num / d;
        acc = a.checked_mul(f).ok_or_else(overflow)?;
    }
    Ok(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Sum over non-decreasing paths `j → i` with `t+1` steps of the product of
/// unnormalized decay weights `e^{-m·step}`.
pub fn decay_path_weight_sum(t: usize, x: usize, m: f64) -> f64 {
    // Power of the (x+1)-node decay kernel restricted to columns 0..=x.
    let k = x + 1;
    let kernel = Array2::from_shape_fn((k, k), |(a, b)| if b <= a { (-((a - b) as f64) * m).exp() } else { 0.0 });
    let mut p = kernel.clone();
    for _ in 0..t {
        p = kernel.dot(&p);
    }
    p[[x, 0]]
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileRow {
    pub t: usize,
    pub i: usize,
    pub j: usize,
    pub x: usize,
    pub p: f64,
    pub profile: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerSpread {
    pub t: usize,
    /// max/min of `ratio` over causal entries at this depth.
    pub spread: f64,
    /// `Π_{s<=t} e^{ΔI_s} / C_min_s`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateReport {
    pub schema: u32,
    pub m: f64,
    pub rows: Vec<ProfileRow>,
    pub spreads: Vec<LayerSpread>,
    pub pass: bool,
}

/// Ratio of `P^(t)_ij` to `C(t+x,x) e^{-xm}` and its spread per depth.
///
/// The per-layer spread factor is the largest upper constant (row 1's
/// `e^{ΔI}`) over `C_min`, taken from [`decay_envelope_check`].
pub fn aggregate_profile_check(trace: &RolloutTrace, m: f64) -> Result<AggregateReport> {
    match trace.pe {
        PeMode::Decay { m: tm, symmetric: false } if (tm - m).abs() <= 1e-12 * m.abs().max(1.0) => {}
        _ => return Err(Error::InvalidPe(format!("trace was produced with {}, expected decay:m={m}", trace.pe))),
    }
    let n = trace.n();
    let mut rows = Vec::new();
    let mut spreads = Vec::new();
    let mut bound = 1.0f64;
    for (t, p) in trace.cumulative.iter().enumerate() {
        ensure_causal(trace.maps[t].view())?;
        let z = &trace.scores[t];
        let env = decay_envelope_check(&trace.maps[t], z.view(), m)?;
        bound *= env.c_max_first_row.unwrap_or(env.c_max_proof).max(env.c_max_proof) / env.c_min_proof;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            for j in 0..=i {
                let x = i - j;
                let profile = ln_profile(t as u64, x as u64, m).exp();
                let ratio = p[[i, j]] / profile;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
                rows.push(ProfileRow { t, i: i + 1, j: j + 1, x, p: p[[i, j]], profile, ratio });
            }
        }
        let spread = hi / lo;
        spreads.push(LayerSpread { t, spread, bound, pass: spread.is_finite() && spread <= bound * (1.0 + SPREAD_SLACK) });
    }
    let pass = spreads.iter().all(|s| s.pass);
    Ok(AggregateReport { schema: SCHEMA_VERSION, m, rows, spreads, pass })
}

fn ln_profile(t: u64, x: u64, m: f64) -> f64 {
    crate::theory::critical::ln_binomial(t, x) - x as f64 * m
}
