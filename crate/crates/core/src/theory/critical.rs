//! Critical points of the aggregate decay and RoPE profiles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::SCHEMA_VERSION;

/// Bisection bracket and absolute tolerance for the RoPE root.
pub const ROPE_BRACKET: (f64, f64) = (1e-12, 1e9);
pub const ROPE_TOL: f64 = 1e-10;

/// `x* = t / (e^m - 1)`.
pub fn critical_point_decay(t: f64, m: f64) -> Result<f64> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(format!("decay rate must be positive, got {m}")));
    }
    if !(t >= 1.0) {
        return Err(Error::InvalidArgument(format!("depth must be >= 1, got {t}")));
    }
    Ok(t / m.exp_m1())
}

/// Root of `ln((t+x)/x) - 2 θ^p x` on `(0, ∞)` by bisection.
pub fn critical_point_rope(t: f64, theta1: f64, exponent: f64) -> Result<f64> {
    if !(theta1 > 0.0) || !theta1.is_finite() {
        return Err(Error::InvalidArgument(format!("theta1 must be positive, got {theta1}")));
    }
    if !(t >= 1.0) {
        return Err(Error::InvalidArgument(format!("depth must be >= 1, got {t}")));
    }
    let k = 2.0 * theta1.powf(exponent);
    let g = |x: f64| (t / x).ln_1p() - k * x;
    let (mut lo, mut hi) = ROPE_BRACKET;
    if !(g(lo) > 0.0 && g(hi) < 0.0) {
        return Err(Error::NoRoot { lo, hi });
    }
    while hi - lo > ROPE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ln C(t+x, x)` as a sum of logs.
pub fn ln_binomial(t: u64, x: u64) -> f64 {
    (1..=x).map(|k| ((t + k) as f64 / k as f64).ln()).sum()
}

/// Integer argmax of `ln C(t+x,x) - x m` over `x = 0..=max_x` (first maximum).
pub fn argmax_decay_profile(t: u64, m: f64, max_x: u64) -> u64 {
    argmax(max_x, |x| ln_binomial(t, x) - x as f64 * m)
}

/// Integer argmax of `ln C(t+x,x) - x² θ^p` over `x = 0..=max_x`.
pub fn argmax_rope_profile(t: u64, theta1: f64, exponent: f64, max_x: u64) -> u64 {
    let k = theta1.powf(exponent);
    argmax(max_x, |x| ln_binomial(t, x) - (x * x) as f64 * k)
}

fn argmax(max_x: u64, f: impl Fn(u64) -> f64) -> u64 {
    let mut best = (0, f(0));
    for x in 1..=max_x {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best.0
}

/// Scan range wide enough to contain the maximum: at least 200 and 4x*+10.
pub fn scan_range(x_star: f64) -> u64 {
    (4.0 * x_star + 10.0).ceil().max(200.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Decay,
    Rope,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub t: u64,
    /// `m` for decay, `θ₁` for RoPE.
    pub param: f64,
    pub x_star: f64,
    pub argmax: u64,
    pub argmax_within_one: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairVerdict {
    /// "t" or "param".
    pub axis: String,
    /// Value held fixed along the pair.
    pub fixed: f64,
    pub from: f64,
    pub to: f64,
    pub x_from: f64,
    pub x_to: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointReport {
    pub schema: u32,
    pub regime: Regime,
    pub exponent: Option<f64>,
    pub grid_t: Vec<u64>,
    pub grid_param: Vec<f64>,
    pub points: Vec<GridPoint>,
    pub pairs: Vec<PairVerdict>,
    pub increasing_in_t: bool,
    pub decreasing_in_param: bool,
    pub argmax_within_one: bool,
}

impl CriticalPointReport {
    pub fn pass(&self) -> bool {
        self.increasing_in_t && self.decreasing_in_param && self.argmax_within_one && self.points.iter().all(|p| p.x_star > 0.0)
    }
}

/// Evaluates `x*` and the brute-force argmax over the full grid.
///
/// Grids must be strictly increasing; `exponent` is only used for RoPE.
pub fn critical_point_grid(regime: Regime, grid_t: &[u64], grid_param: &[f64], exponent: f64) -> Result<CriticalPointReport> {
    if grid_t.is_empty() || grid_param.is_empty() {
        return Err(Error::InvalidArgument("empty critical-point grid".into()));
    }
    if grid_t.windows(2).any(|w| w[0] >= w[1]) || grid_param.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("grids must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(grid_t.len() * grid_param.len());
    for &t in grid_t {
        for &p in grid_param {
            let (x_star, argmax) = match regime {
                Regime::Decay => {
                    let x = critical_point_decay(t as f64, p)?;
                    (x, argmax_decay_profile(t, p, scan_range(x)))
                }
                Regime::Rope => {
                    let x = critical_point_rope(t as f64, p, exponent)?;
                    (x, argmax_rope_profile(t, p, exponent, scan_range(x)))
                }
            };
            points.push(GridPoint { t, param: p, x_star, argmax, argmax_within_one: (argmax as f64 - x_star).abs() <= 1.0 });
        }
    }
    let np = grid_param.len();
    let at = |ti: usize, pi: usize| &points[ti * np + pi];
    let mut pairs = Vec::new();
    for pi in 0..np {
        for ti in 1..grid_t.len() {
            let (a, b) = (at(ti - 1, pi), at(ti, pi));
            pairs.push(PairVerdict {
                axis: "t".into(),
                fixed: a.param,
                from: a.t as f64,
                to: b.t as f64,
                x_from: a.x_star,
                x_to: b.x_star,
                ok: b.x_star > a.x_star,
            });
        }
    }
    for ti in 0..grid_t.len() {
        for pi in 1..np {
            let (a, b) = (at(ti, pi - 1), at(ti, pi));
            pairs.push(PairVerdict {
                axis: "param".into(),
                fixed: a.t as f64,
                from: a.param,
                to: b.param,
                x_from: a.x_star,
                x_to: b.x_star,
                ok: b.x_star < a.x_star,
            });
        }
    }
    let increasing_in_t = pairs.iter().filter(|p| p.axis == "t").all(|p| p.ok);
    let decreasing_in_param = pairs.iter().filter(|p| p.axis == "param").all(|p| p.ok);
    let argmax_within_one = points.iter().all(|p| p.argmax_within_one);
    Ok(CriticalPointReport {
        schema: SCHEMA_VERSION,
        regime,
        exponent: (regime == Regime::Rope).then_some(exponent),
        grid_t: grid_t.to_vec(),
        grid_param: grid_param.to_vec(),
        points,
        pairs,
        increasing_in_t,
        decreasing_in_param,
        argmax_within_one,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_examples() {
        assert!((critical_point_decay(3.0, 2f64.ln()).unwrap() - 3.0).abs() < 1e-12);
        assert!(critical_point_decay(3.0, 0.0).is_err());
        assert!(critical_point_decay(3.0, -1.0).is_err());
        let xs: Vec<f64> = [0.1, 1.0, 10.0, 50.0].iter().map(|&m| critical_point_decay(4.0, m).unwrap()).collect();
        assert!(xs.windows(2).all(|w| w[1] < w[0]));
        assert!(xs[3] > 0.0 && xs[3] < 1e-20);
    }

    #[test]
    fn rope_root_solves_equation() {
        for &(t, th) in &[(2.0, 0.1), (8.0, 0.05), (32.0, 0.2), (1.0, 1.0)] {
            let x = critical_point_rope(t, th, 2.0).unwrap();
            let g = ((t + x) / x).ln() - 2.0 * th * th * x;
            assert!(g.abs() < 1e-8, "t={t} th={th} g={g}");
        }
        assert!(critical_point_rope(8.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn rope_monotone_examples() {
        let x = |t, th| critical_point_rope(t, th, 2.0).unwrap();
        assert!(x(2.0, 0.1) < x(8.0, 0.1) && x(8.0, 0.1) < x(32.0, 0.1));
        assert!(x(8.0, 0.05) > x(8.0, 0.2));
        // The alternative reading with θ¹ shares the orderings.
        let y = |t, th| critical_point_rope(t, th, 1.0).unwrap();
        assert!(y(2.0, 0.1) < y(8.0, 0.1) && y(8.0, 0.05) > y(8.0, 0.2));
    }

    #[test]
    fn default_grids_pass() {
        let t = [2, 4, 8, 16, 32];
        let d = critical_point_grid(Regime::Decay, &t, &[0.1, 0.223, 0.7], 2.0).unwrap();
        assert!(d.pass(), "{d:?}");
        assert_eq!(d.pairs.len(), 3 * 4 + 5 * 2);
        let r = critical_point_grid(Regime::Rope, &t, &[0.02, 0.05, 0.1, 0.2], 2.0).unwrap();
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn scan_covers_large_critical_points() {
        let x = critical_point_decay(32.0, 0.1).unwrap();
        assert!(x > 300.0);
        assert!(scan_range(x) as f64 > x + 1.0);
    }
}
