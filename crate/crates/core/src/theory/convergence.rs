//! Convergence of rollout mass onto center nodes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::SCHEMA_VERSION;
use crate::mask::{MaskGraph, MaskKind};
use crate::rollout::RolloutTrace;

/// Values below this are treated as underflowed when fitting log-rates.
pub const FIT_FLOOR: f64 = 1e-280;

/// Slack allowed when comparing fitted slopes of neighbouring columns.
pub const SLOPE_ORDER_SLACK: f64 = 1e-6;

/// Lower bound on any allowed softmax entry when `|Z_ij| <= c_logit`:
/// `e^{-2 c_logit} / n`.
pub fn epsilon_floor(c_logit: f64, n: usize) -> f64 {
    (-2.0 * c_logit).exp() / n as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnFit {
    /// 1-based column.
    pub column: usize,
    /// Least-squares slope of `ln max_i P^(t)_ij` against `t`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub schema: u32,
    pub mask: String,
    pub n: usize,
    pub depth: usize,
    pub tol: f64,
    pub center: Vec<usize>,
    /// `m(t) = min_i Σ_{k ∈ center} P^(t)_ik`.
    pub center_mass: Vec<f64>,
    pub first_converged: Option<usize>,
    pub column_fits: Vec<ColumnFit>,
    pub slopes_negative: bool,
    /// Causal masks only: slopes weakly decreasing in the column index.
    pub slopes_ordered: Option<bool>,
    pub c_fit: Option<f64>,
    pub eps_fit: Option<f64>,
    /// Prefix masks only.
    pub kappa_hat: Option<f64>,
    pub kappa_columns: Option<Vec<f64>>,
    pub t_burn: usize,
}

fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn column_max(p: &ndarray::Array2<f64>, col: usize) -> f64 {
    p.column(col).iter().copied().fold(0.0, f64::max)
}

/// Fits `ln max_i P_ij` over the second half of the trace.
fn fit_column(trace: &RolloutTrace, col: usize) -> ColumnFit {
    let depth = trace.depth();
    let series: Vec<(f64, f64)> = trace
        .cumulative
        .iter()
        .enumerate()
        .map(|(t, p)| (t as f64, column_max(p, col)))
        .collect();
    let mut pts: Vec<(f64, f64)> = series[depth / 2..]
        .iter()
        .filter(|(_, v)| *v > FIT_FLOOR)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        // Fast columns underflow early: use the later half of what survives.
        let alive: Vec<(f64, f64)> = series
            .iter()
            .filter(|(_, v)| *v > FIT_FLOOR)
            .map(|&(t, v)| (t, v.ln()))
            .collect();
        pts = alive[alive.len() / 2..].to_vec();
    }
    let fit = least_squares(&pts);
    ColumnFit {
        column: col + 1,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        points: pts.len(),
    }
}

pub fn verify_center_convergence(trace: &RolloutTrace, g: &MaskGraph, tol: f64) -> Result<ConvergenceReport> {
    let n = g.n();
    if trace.n() != n {
        return Err(Error::Shape(format!("trace has n={}, mask has n={n}", trace.n())));
    }
    let depth = trace.depth();
    let center = g.center_nodes();
    let center_mass: Vec<f64> = trace
        .cumulative
        .iter()
        .map(|p| {
            (0..n)
                .map(|i| center.iter().map(|&c| p[[i, c - 1]]).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let first_converged = center_mass.iter().position(|&m| m >= 1.0 - tol);

    let column_fits: Vec<ColumnFit> = (0..n)
        .filter(|c| !center.contains(&(c + 1)))
        .map(|c| fit_column(trace, c))
        .collect();
    let slopes_negative = column_fits.iter().all(|f| f.slope.is_some_and(|s| s < 0.0));

    let slopes_ordered = g.kind().filter(MaskKind::is_causal).map(|_| {
        column_fits.windows(2).all(|w| match (w[0].slope, w[1].slope) {
            (Some(a), Some(b)) => b <= a + SLOPE_ORDER_SLACK,
            _ => false,
        })
    });

    // Descriptive envelope fit: ε from each column's rate, C covering the trace.
    let last_center = center.iter().copied().max().unwrap_or(1);
    let eps_fit = column_fits
        .iter()
        .filter_map(|f| {
            let offset = f.column.saturating_sub(last_center).max(1) as f64;
            f.slope.map(|s| (1.0 - s.exp()) / offset)
        })
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.min(e))))
        .filter(|e| *e > 0.0 && *e < 1.0);
    let c_fit = eps_fit.map(|eps| {
        let mut c: f64 = 0.0;
        for f in &column_fits {
            let offset = f.column.saturating_sub(last_center).max(1) as f64;
            let base = 1.0 - offset * eps;
            if base <= 0.0 {
                continue;
            }
            for (t, p) in trace.cumulative.iter().enumerate() {
                let v = column_max(p, f.column - 1);
                if v > FIT_FLOOR {
                    c = c.max((v.ln() - t as f64 * base.ln()).exp());
                }
            }
        }
        c
    });

    let t_burn = depth / 2;
    let (kappa_hat, kappa_columns) = match g.kind() {
        Some(MaskKind::Prefix { prefix_len }) => {
            let cols: Vec<f64> = (0..prefix_len)
                .map(|k| {
                    trace.cumulative[t_burn..]
                        .iter()
                        .flat_map(|p| p.column(k).to_vec())
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let kappa = cols.iter().copied().fold(f64::INFINITY, f64::min);
            (Some(kappa), Some(cols))
        }
        _ => (None, None),
    };

    Ok(ConvergenceReport {
        schema: SCHEMA_VERSION,
        mask: g.kind().map_or_else(|| "custom".to_string(), |k| k.to_string()),
        n,
        depth,
        tol,
        center,
        center_mass,
        first_converged,
        column_fits,
        slopes_negative,
        slopes_ordered,
        c_fit,
        eps_fit,
        kappa_hat,
        kappa_columns,
        t_burn,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowCrossing {
    pub width: usize,
    /// First `t` with `P^(t)_{N,1} >= 1 - tol`.
    pub first_crossing: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowComparison {
    pub tol: f64,
    pub crossings: Vec<WindowCrossing>,
    /// Crossing times non-increasing as the width grows (never = +∞).
    pub non_increasing: bool,
}

/// Compares convergence speed of `P_{N,1}` across window widths.
///
/// `traces` must be sorted by strictly increasing width.
pub fn window_rate_comparison(traces: &[(usize, &RolloutTrace)], tol: f64) -> Result<WindowComparison> {
    let Some((_, first)) = traces.first() else {
        return Err(Error::InvalidArgument("no traces to compare".into()));
    };
    let (n, depth) = (first.n(), first.depth());
    if traces.iter().any(|(_, t)| t.n() != n || t.depth() != depth) {
        return Err(Error::Shape("traces differ in n or depth".into()));
    }
    if traces.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidArgument("widths must be strictly increasing".into()));
    }
    let crossings: Vec<WindowCrossing> = traces
        .iter()
        .map(|(w, tr)| WindowCrossing {
            width: *w,
            first_crossing: tr.cumulative.iter().position(|p| p[[n - 1, 0]] >= 1.0 - tol),
        })
        .collect();
    let key = |c: &WindowCrossing| c.first_crossing.unwrap_or(usize::MAX);
    let non_increasing = crossings.windows(2).all(|w| key(&w[1]) <= key(&w[0]));
    Ok(WindowComparison { tol, crossings, non_increasing })
}
