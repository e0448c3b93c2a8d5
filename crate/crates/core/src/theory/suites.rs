//! Named verification suites with JSON verdicts.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::attention::{init_stack, layer_forward_detailed, AttentionMap, LayerStack, PeMode};
use crate::error::{Error, Result};
use crate::mask::{MaskGraph, MaskKind};
use crate::rollout::rollout;
use crate::seed::{derive_seed, stream_rng};
use crate::theory::convergence::{epsilon_floor, verify_center_convergence, window_rate_comparison};
use crate::theory::critical::{argmax_decay_profile, critical_point_decay, critical_point_grid, scan_range, Regime};
use crate::theory::envelope::decay_envelope_check;
use crate::theory::paths::{aggregate_profile_check, decay_path_weight_sum, monotone_path_count};
use crate::theory::rope::{rope_envelope_check, rope_segment_bounds, segment_share, RopeLayerData};

pub const SUITE_NAMES: [&str; 9] = [
    "center-convergence",
    "window-ordering",
    "prefix-floor",
    "attention-floor",
    "decay-envelope",
    "aggregate-decay",
    "rope-lemma",
    "segment-bounds",
    "critical-points",
];

/// Suites that can be sabotaged on purpose to exercise the failure path.
pub const FAULT_TARGETS: [&str; 1] = ["decay-envelope"];

/// Relative tolerance of the oracle path-sum identity.
pub const ORACLE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub seed: u64,
    pub seeds: u64,
    pub n: usize,
    pub d: usize,
    pub depth: usize,
    pub c_bound: f64,
    pub tol: f64,
    pub window_widths: Vec<usize>,
    pub window_tol: f64,
    pub prefix_lens: Vec<usize>,
    pub kappa_min: f64,
    pub floor_depth: usize,
    pub envelope_n: usize,
    pub envelope_layers: usize,
    pub decay_grid: Vec<f64>,
    pub aggregate_max_t: usize,
    pub aggregate_max_x: usize,
    pub aggregate_n: usize,
    pub aggregate_depth: usize,
    pub argmax_max_t: u64,
    pub grid_t: Vec<u64>,
    pub grid_theta: Vec<f64>,
    pub rope_exponent: f64,
    pub rope_trials: usize,
    pub rope_n: usize,
    pub rope_theta: f64,
    pub rope_delta: f64,
    pub segment_trials: usize,
    pub segment_dims: Vec<usize>,
    pub inject_fault: Option<String>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: 5,
            n: 16,
            d: 8,
            depth: 256,
            c_bound: 1.0,
            tol: 0.01,
            window_widths: vec![2, 4, 8, 16],
            window_tol: 0.1,
            prefix_lens: vec![2, 4],
            kappa_min: 0.01,
            floor_depth: 32,
            envelope_n: 8,
            envelope_layers: 100,
            decay_grid: vec![0.1, 0.223, 0.7],
            aggregate_max_t: 6,
            aggregate_max_x: 6,
            aggregate_n: 6,
            aggregate_depth: 4,
            argmax_max_t: 32,
            grid_t: vec![2, 4, 8, 16, 32],
            grid_theta: vec![0.02, 0.05, 0.1, 0.2],
            rope_exponent: 2.0,
            rope_trials: 1000,
            rope_n: 8,
            rope_theta: 0.1,
            rope_delta: 0.5,
            segment_trials: 1000,
            segment_dims: vec![4, 8],
            inject_fault: None,
        }
    }
}

impl VerifySettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.seeds == 0 || self.n == 0 || self.d == 0 || self.depth == 0 {
            return bad("seeds, n, d and depth must be >= 1".into());
        }
        if !(self.c_bound > 0.0) || !(self.tol > 0.0 && self.tol < 1.0) || !(self.window_tol > 0.0 && self.window_tol < 1.0) {
            return bad("c_bound must be > 0 and tolerances in (0, 1)".into());
        }
        if self.window_widths.windows(2).any(|w| w[0] >= w[1]) || self.window_widths.iter().any(|&w| w < 2 || w > self.n) {
            return bad("window_widths must be strictly increasing within [2, n]".into());
        }
        if self.prefix_lens.iter().any(|&k| k == 0 || k > self.n) {
            return bad("prefix_lens must lie in [1, n]".into());
        }
        if self.decay_grid.iter().any(|&m| !(m > 0.0)) || self.grid_theta.iter().any(|&t| !(t > 0.0)) {
            return bad("decay and theta grids must be positive".into());
        }
        if self.segment_dims.iter().any(|&d| d == 0 || d % 2 != 0) {
            return bad("segment_dims must be even".into());
        }
        if let Some(f) = &self.inject_fault {
            if !FAULT_TARGETS.contains(&f.as_str()) {
                return bad(format!("cannot inject a fault into '{f}' (supported: {})", FAULT_TARGETS.join(", ")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteVerdict {
    pub schema: u32,
    pub suite: String,
    pub pass: bool,
    pub failures: Vec<String>,
    pub details: serde_json::Value,
}

fn verdict(suite: &str, failures: Vec<String>, details: serde_json::Value) -> SuiteVerdict {
    SuiteVerdict { schema: crate::export::SCHEMA_VERSION, suite: suite.to_string(), pass: failures.is_empty(), failures, details }
}

/// `n × d` Gaussian rows scaled to unit norm.
pub fn random_unit_rows(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
    let mut x: Array2<f64> = Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut *rng));
    for mut row in x.rows_mut() {
        let norm = row.dot(&row).sqrt();
        row /= norm;
    }
    x
}

fn seeded_case(s: &VerifySettings, stream: &str, index: u64, n: usize, depth: usize) -> Result<(LayerStack, Array2<f64>)> {
    let stack = init_stack(s.d, depth, s.c_bound, derive_seed(s.seed, stream, index))?;
    let x0 = random_unit_rows(&mut stream_rng(s.seed, &format!("{stream}/inputs"), index), n, s.d);
    Ok((stack, x0))
}

pub fn run_suite(name: &str, s: &VerifySettings) -> Result<SuiteVerdict> {
    s.validate()?;
    match name {
        "center-convergence" => center_convergence(s),
        "window-ordering" => window_ordering(s),
        "prefix-floor" => prefix_floor(s),
        "attention-floor" => attention_floor(s),
        "decay-envelope" => decay_envelope(s),
        "aggregate-decay" => aggregate_decay(s),
        "rope-lemma" => rope_lemma(s),
        "segment-bounds" => segment_bounds(s),
        "critical-points" => critical_points(s),
        other => Err(Error::InvalidArgument(format!("unknown suite '{other}' (known: {})", SUITE_NAMES.join(", ")))),
    }
}

/// Runs the named suites (all when `only` is empty) in canonical order.
pub fn run_suites(only: &[String], s: &VerifySettings) -> Result<Vec<SuiteVerdict>> {
    for name in only {
        if !SUITE_NAMES.contains(&name.as_str()) {
            return Err(Error::InvalidArgument(format!("unknown suite '{name}' (known: {})", SUITE_NAMES.join(", "))));
        }
    }
    SUITE_NAMES
        .iter()
        .filter(|n| only.is_empty() || only.iter().any(|o| o == *n))
        .map(|n| run_suite(n, s))
        .collect()
}

fn center_convergence(s: &VerifySettings) -> Result<SuiteVerdict> {
    let g = MaskGraph::new(MaskKind::Causal, s.n)?;
    let mut failures = Vec::new();
    let mut runs = Vec::new();
    for seed in 0..s.seeds {
        let (stack, x0) = seeded_case(s, "convergence", seed, s.n, s.depth)?;
        let tr = rollout(x0.view(), &stack, &g, &PeMode::NoPe)?;
        let rep = verify_center_convergence(&tr, &g, s.tol)?;
        let final_mass = *rep.center_mass.last().unwrap_or(&0.0);
        if final_mass < 1.0 - s.tol {
            failures.push(format!("seed {seed}: min_i P_i1 = {final_mass} at t = {}", s.depth - 1));
        }
        for f in &rep.column_fits {
            if !f.slope.is_some_and(|v| v < 0.0) {
                failures.push(format!("seed {seed}: column {} slope {:?} not negative", f.column, f.slope));
            }
        }
        if rep.slopes_ordered != Some(true) {
            let slopes: Vec<_> = rep.column_fits.iter().map(|f| f.slope).collect();
            failures.push(format!("seed {seed}: slopes not weakly decreasing in j: {slopes:?}"));
        }
        runs.push(json!({
            "seed": seed,
            "first_converged": rep.first_converged,
            "final_center_mass": final_mass,
            "slopes": rep.column_fits.iter().map(|f| f.slope).collect::<Vec<_>>(),
            "eps_fit": rep.eps_fit,
            "c_fit": rep.c_fit,
        }));
    }
    Ok(verdict("center-convergence", failures, json!({ "n": s.n, "depth": s.depth, "tol": s.tol, "runs": runs })))
}

fn window_ordering(s: &VerifySettings) -> Result<SuiteVerdict> {
    let mut failures = Vec::new();
    let mut runs = Vec::new();
    for seed in 0..s.seeds {
        let (stack, x0) = seeded_case(s, "convergence", seed, s.n, s.depth)?;
        let traces = s
            .window_widths
            .iter()
            .map(|&w| rollout(x0.view(), &stack, &MaskGraph::new(MaskKind::SlidingWindow { width: w }, s.n)?, &PeMode::NoPe))
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(usize, &_)> = s.window_widths.iter().copied().zip(traces.iter()).collect();
        let cmp = window_rate_comparison(&pairs, s.window_tol)?;
        if !cmp.non_increasing {
            let times: Vec<_> = cmp.crossings.iter().map(|c| (c.width, c.first_crossing)).collect();
            failures.push(format!("seed {seed}: crossing times increase with width: {times:?}"));
        }
        runs.push(json!({ "seed": seed, "crossings": cmp.crossings }));
    }
    Ok(verdict("window-ordering", failures, json!({ "n": s.n, "tol": s.window_tol, "runs": runs })))
}

fn prefix_floor(s: &VerifySettings) -> Result<SuiteVerdict> {
    let mut failures = Vec::new();
    let mut runs = Vec::new();
    for &k in &s.prefix_lens {
        let g = MaskGraph::new(MaskKind::Prefix { prefix_len: k }, s.n)?;
        for seed in 0..s.seeds {
            let (stack, x0) = seeded_case(s, "convergence", seed, s.n, s.depth)?;
            let tr = rollout(x0.view(), &stack, &g, &PeMode::NoPe)?;
            let rep = verify_center_convergence(&tr, &g, s.tol)?;
            let final_mass = *rep.center_mass.last().unwrap_or(&0.0);
            if final_mass < 1.0 - s.tol {
                failures.push(format!("K={k} seed {seed}: prefix mass {final_mass} at final t"));
            }
            for (col, kappa) in rep.kappa_columns.iter().flatten().enumerate() {
                if !(*kappa > s.kappa_min) {
                    failures.push(format!("K={k} seed {seed}: kappa_hat {kappa} at column {}", col + 1));
                }
            }
            runs.push(json!({ "k": k, "seed": seed, "final_center_mass": final_mass, "kappa_hat": rep.kappa_hat, "kappa_columns": rep.kappa_columns }));
        }
    }
    Ok(verdict("prefix-floor", failures, json!({ "n": s.n, "depth": s.depth, "kappa_min": s.kappa_min, "runs": runs })))
}

/// Every allowed entry dominates `e^{-2c}/N` with `c` the realized logit
/// bound, and also with the a-priori bound `C²` for unit-norm inputs.
fn attention_floor(s: &VerifySettings) -> Result<SuiteVerdict> {
    let kinds = [
        MaskKind::Causal,
        MaskKind::SlidingWindow { width: 4.min(s.n).max(2.min(s.n)) },
        MaskKind::Prefix { prefix_len: 2.min(s.n) },
        MaskKind::Complete,
    ];
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut checked = 0usize;
    for kind in kinds {
        if kind.validate(s.n).is_err() {
            continue;
        }
        let g = MaskGraph::new(kind, s.n)?;
        for seed in 0..s.seeds {
            let (stack, x0) = seeded_case(s, "floor", seed, s.n, s.floor_depth)?;
            let tr = rollout(x0.view(), &stack, &g, &PeMode::NoPe)?;
            let prior = epsilon_floor(s.c_bound * s.c_bound, s.n);
            for (t, map) in tr.maps.iter().enumerate() {
                let realized = tr.scores[t].iter().fold(0.0f64, |a, &z| a.max(z.abs()));
                if realized > s.c_bound * s.c_bound * (1.0 + 1e-12) {
                    failures.push(format!("{kind} seed {seed} t={t}: |Z| = {realized} exceeds C^2"));
                }
                let floor = epsilon_floor(realized, s.n);
                for i in 0..s.n {
                    for j in 0..s.n {
                        if !g.allows(i, j) {
                            continue;
                        }
                        checked += 1;
                        let a = map.get(i, j);
                        min_margin = min_margin.min(a / floor);
                        if a < floor * (1.0 - 1e-12) || a < prior * (1.0 - 1e-12) {
                            failures.push(format!("{kind} seed {seed} (t,i,j)=({t},{},{}): {a} below floor {floor}", i + 1, j + 1));
                        }
                    }
                }
            }
            if kind == MaskKind::Complete {
                for (t, p) in tr.cumulative.iter().enumerate() {
                    let low = p.iter().fold(f64::INFINITY, |a, &v| a.min(v));
                    if low < prior * (1.0 - 1e-12) {
                        failures.push(format!("complete seed {seed} t={t}: rollout entry {low} below floor {prior}"));
                    }
                }
            }
        }
    }
    failures.truncate(50);
    Ok(verdict("attention-floor", failures, json!({ "entries_checked": checked, "min_ratio_to_floor": min_margin })))
}

fn decay_layer(s: &VerifySettings, m: f64, index: u64) -> Result<(AttentionMap, Array2<f64>)> {
    let n = s.envelope_n;
    let (stack, x) = seeded_case(s, "decay-envelope", index, n, 1)?;
    let g = MaskGraph::new(MaskKind::Causal, n)?;
    let out = layer_forward_detailed(x.view(), &stack.layers[0], &g, &PeMode::Decay { m, symmetric: false }, 1.0, 0)?;
    Ok((out.map, out.scores))
}

fn decay_envelope(s: &VerifySettings) -> Result<SuiteVerdict> {
    let inject = s.inject_fault.as_deref() == Some("decay-envelope");
    let mut failures = Vec::new();
    let mut per_m = Vec::new();
    for (mi, &m) in s.decay_grid.iter().enumerate() {
        let mut violations = 0usize;
        let mut tightest_lower = f64::INFINITY;
        for layer in 0..s.envelope_layers {
            let (mut map, z) = decay_layer(s, m, (mi * s.envelope_layers + layer) as u64)?;
            if inject && mi == 0 && layer == 0 {
                let n = map.n();
                let moved = map.0[[n - 1, 0]] * (1.0 - 1e-6);
                map.0[[n - 1, 0]] -= moved;
                map.0[[n - 1, n - 1]] += moved;
            }
            let rep = decay_envelope_check(&map, z.view(), m)?;
            violations += rep.violations;
            for e in &rep.entries {
                tightest_lower = tightest_lower.min(e.value / e.lower);
                if !e.pass && failures.len() < 50 {
                    failures.push(format!("m={m} layer {layer} (i,j)=({},{}): {} outside [{}, {}]", e.i, e.j, e.value, e.lower, e.upper));
                }
            }
        }
        per_m.push(json!({ "m": m, "layers": s.envelope_layers, "violations": violations, "min_value_over_lower": tightest_lower }));
    }
    Ok(verdict(
        "decay-envelope",
        failures,
        json!({ "n": s.envelope_n, "fault_injected": inject, "first_row_upper": "exp(I_max - I_min)", "grid": per_m }),
    ))
}

fn aggregate_decay(s: &VerifySettings) -> Result<SuiteVerdict> {
    let mut failures = Vec::new();
    let mut worst_rel = 0.0f64;
    for &m in &s.decay_grid {
        for t in 0..=s.aggregate_max_t {
            for x in 0..=s.aggregate_max_x {
                let expected = monotone_path_count(t as u64, x as u64)? as f64 * (-(x as f64) * m).exp();
                let got = decay_path_weight_sum(t, x, m);
                let rel = ((got - expected) / expected).abs();
                worst_rel = worst_rel.max(rel);
                if rel > ORACLE_REL_TOL {
                    failures.push(format!("oracle m={m} t={t} x={x}: {got} vs {expected}"));
                }
            }
        }
    }

    let mut spreads = Vec::new();
    for &m in &s.decay_grid {
        let g = MaskGraph::new(MaskKind::Causal, s.aggregate_n)?;
        for seed in 0..s.seeds {
            let (stack, x0) = seeded_case(s, "aggregate", seed, s.aggregate_n, s.aggregate_depth + 1)?;
            let tr = rollout(x0.view(), &stack, &g, &PeMode::Decay { m, symmetric: false })?;
            let rep = aggregate_profile_check(&tr, m)?;
            for sp in rep.spreads.iter().filter(|sp| !sp.pass) {
                failures.push(format!("spread m={m} seed {seed} t={}: {} > {}", sp.t, sp.spread, sp.bound));
            }
            let last = rep.spreads.last().expect("non-empty trace");
            spreads.push(json!({ "m": m, "seed": seed, "spread": last.spread, "bound": last.bound }));
        }
    }

    let mut argmax = Vec::new();
    for &m in &s.decay_grid {
        for t in 1..=s.argmax_max_t {
            let x_star = critical_point_decay(t as f64, m)?;
            let best = argmax_decay_profile(t, m, scan_range(x_star));
            if (best as f64 - x_star).abs() > 1.0 {
                failures.push(format!("argmax m={m} t={t}: {best} vs x* = {x_star}"));
            }
            argmax.push(json!({ "m": m, "t": t, "x_star": x_star, "argmax": best }));
        }
    }
    Ok(verdict(
        "aggregate-decay",
        failures,
        json!({ "oracle_max_rel_error": worst_rel, "spreads": spreads, "argmax": argmax }),
    ))
}

/// Random queries/keys for one RoPE trial. Even trials cluster all angles
/// within `±δθ/2` of a common direction so the hypothesis holds.
fn rope_trial(rng: &mut impl Rng, n: usize, theta: f64, delta: f64, clustered: bool) -> (Array2<f64>, Array2<f64>) {
    let base: f64 = rng.random_range(-PI..PI);
    let mut q = Array2::zeros((n, 2));
    let mut k = Array2::zeros((n, 2));
    for i in 0..2 * n {
        let angle = if clustered { base + rng.random_range(-0.5..=0.5) * delta * theta } else { rng.random_range(-PI..PI) };
        let r: f64 = rng.random_range(0.25..2.0);
        let target = if i % 2 == 0 { &mut q } else { &mut k };
        target[[i / 2, 0]] = r * angle.cos();
        target[[i / 2, 1]] = r * angle.sin();
    }
    (q, k)
}

fn rope_lemma(s: &VerifySettings) -> Result<SuiteVerdict> {
    let g = MaskGraph::new(MaskKind::Causal, s.rope_n)?;
    let mut rng = stream_rng(s.seed, "rope-lemma", 0);
    let mut failures = Vec::new();
    let (mut met, mut flagged, mut envelope_checked) = (0usize, 0usize, 0usize);
    let (mut angle_err, mut ip_err) = (0.0f64, 0.0f64);
    for trial in 0..s.rope_trials {
        let (q, k) = rope_trial(&mut rng, s.rope_n, s.rope_theta, s.rope_delta, trial % 2 == 0);
        let data = RopeLayerData::from_vectors(q, k, &g, &[s.rope_theta])?;
        let rep = rope_envelope_check(&data, s.rope_theta, s.rope_delta)?;
        angle_err = angle_err.max(rep.max_angle_law_error);
        ip_err = ip_err.max(rep.max_inner_product_error);
        if rep.hypothesis_met {
            met += 1;
        } else {
            flagged += 1;
        }
        if !rep.angle_law_holds || !rep.inner_product_holds {
            failures.push(format!("trial {trial}: identity error angle={} inner={}", rep.max_angle_law_error, rep.max_inner_product_error));
        }
        if let Some(env) = &rep.envelope {
            envelope_checked += 1;
            if let Some(e) = env.first_violation() {
                failures.push(format!("trial {trial} (i,j)=({},{}): {} outside [{}, {}]", e.i, e.j, e.value, e.lower, e.upper));
            }
        }
    }
    // Large base angle: (δ + N - 1)θ > π must be flagged, not asserted.
    let wide_theta = 1.0;
    let (q, k) = rope_trial(&mut rng, s.rope_n, wide_theta, s.rope_delta, true);
    let wide = rope_envelope_check(&RopeLayerData::from_vectors(q, k, &g, &[wide_theta])?, wide_theta, s.rope_delta)?;
    if (s.rope_delta + s.rope_n as f64 - 1.0) * wide_theta > PI && (wide.hypothesis_met || wide.envelope.is_some()) {
        failures.push("theta1 = 1 case was not flagged".into());
    }
    if met == 0 && s.rope_trials > 0 {
        failures.push("no trial satisfied the hypothesis".into());
    }
    failures.truncate(50);
    Ok(verdict(
        "rope-lemma",
        failures,
        json!({
            "trials": s.rope_trials,
            "n": s.rope_n,
            "theta1": s.rope_theta,
            "delta": s.rope_delta,
            "hypothesis_met": met,
            "hypothesis_flagged": flagged,
            "envelopes_checked": envelope_checked,
            "max_angle_law_error": angle_err,
            "max_inner_product_error": ip_err,
            "cosine_constant": crate::theory::rope::COSINE_CONSTANT,
            "wide_theta_flagged": !wide.hypothesis_met,
        }),
    ))
}

fn segment_bounds(s: &VerifySettings) -> Result<SuiteVerdict> {
    let mut failures = Vec::new();
    let mut per_dim = Vec::new();
    for &d in &s.segment_dims {
        let mut rng = stream_rng(s.seed, "segment-bounds", d as u64);
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for trial in 0..s.segment_trials {
            let q = random_unit_rows(&mut rng, 1, d).row(0).to_owned();
            let k = random_unit_rows(&mut rng, 1, d).row(0).to_owned();
            let rep = rope_segment_bounds(q.view(), k.view(), segment_share(q.view()), segment_share(k.view()))?;
            if !rep.hypothesis_met {
                failures.push(format!("d={d} trial {trial}: exact betas rejected: {:?}", rep.hypothesis_failures));
            }
            if rep.bound > 0.0 {
                worst = worst.max(rep.segment_angles.iter().fold(0.0f64, |a, &b| a.max(b)) / rep.bound);
            }
            if !rep.violations.is_empty() {
                violations += 1;
                if failures.len() < 50 {
                    failures.push(format!("d={d} trial {trial}: segments {:?} exceed {}", rep.violations, rep.bound));
                }
            }
        }
        per_dim.push(json!({ "d": d, "trials": s.segment_trials, "violations": violations, "max_angle_over_bound": worst }));
    }
    Ok(verdict("segment-bounds", failures, json!({ "dims": per_dim })))
}

fn critical_points(s: &VerifySettings) -> Result<SuiteVerdict> {
    let decay = critical_point_grid(Regime::Decay, &s.grid_t, &s.decay_grid, s.rope_exponent)?;
    let rope = critical_point_grid(Regime::Rope, &s.grid_t, &s.grid_theta, s.rope_exponent)?;
    let mut failures = Vec::new();
    for rep in [&decay, &rope] {
        for p in rep.pairs.iter().filter(|p| !p.ok) {
            failures.push(format!("{:?} {} {} -> {} at fixed {}: x* {} -> {}", rep.regime, p.axis, p.from, p.to, p.fixed, p.x_from, p.x_to));
        }
        for p in rep.points.iter().filter(|p| !p.argmax_within_one || !(p.x_star > 0.0)) {
            failures.push(format!("{:?} (t={}, param={}): argmax {} vs x* {}", rep.regime, p.t, p.param, p.argmax, p.x_star));
        }
    }
    Ok(verdict("critical-points", failures, json!({ "decay": decay, "rope": rope })))
}
