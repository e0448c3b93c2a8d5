//! Rotary-embedding angle law, d = 2 envelope and segment bounds.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::attention::{masked_softmax, rope_rotate, rotate_rows, AttentionMap, PeMode, RopeAngles};
use crate::error::{Error, Result};
use crate::export::SCHEMA_VERSION;
use crate::mask::MaskGraph;
use crate::rollout::RolloutTrace;
use crate::theory::envelope::{ensure_causal, within, EnvelopeEntry, EnvelopeRegime, EnvelopeReport};

/// Tolerance for the angle law and the inner-product identity.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Relative slack when comparing segment norm shares against the betas.
pub const SHARE_SLACK: f64 = 1e-12;

/// `c` in `cos x <= 1 - x²/c` for `|x| <= π` (tight at `x = π`).
pub const COSINE_CONSTANT: f64 = PI * PI / 2.0;

/// Unrotated queries and keys of one layer plus its attention map.
#[derive(Debug, Clone)]
pub struct RopeLayerData {
    pub queries: Array2<f64>,
    pub keys: Array2<f64>,
    pub map: AttentionMap,
}

impl RopeLayerData {
    pub fn from_trace(trace: &RolloutTrace, layer: usize) -> Result<Self> {
        if layer >= trace.depth() {
            return Err(Error::InvalidArgument(format!("layer {layer} out of range for depth {}", trace.depth())));
        }
        Ok(Self {
            queries: trace.queries[layer].clone(),
            keys: trace.keys[layer].clone(),
            map: trace.maps[layer].clone(),
        })
    }

    /// Builds the attention map from `queries`/`keys` with rotation angles `theta`.
    pub fn from_vectors(queries: Array2<f64>, keys: Array2<f64>, g: &MaskGraph, theta: &[f64]) -> Result<Self> {
        if queries.dim() != keys.dim() || queries.nrows() != g.n() {
            return Err(Error::Shape("queries, keys and mask disagree".into()));
        }
        PeMode::Rope(RopeAngles::Explicit(theta.to_vec())).validate(queries.ncols())?;
        let mut q = queries.clone();
        let mut k = keys.clone();
        rotate_rows(&mut q, theta);
        rotate_rows(&mut k, theta);
        let map = masked_softmax(q.dot(&k.t()).view(), g);
        Ok(Self { queries, keys, map })
    }
}

/// Angle between two vectors, accurate near 0 and π.
pub fn vector_angle(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    let ua = &a / na;
    let ub = &b / nb;
    let diff = &ua - &ub;
    let sum = &ua + &ub;
    2.0 * diff.dot(&diff).sqrt().atan2(sum.dot(&sum).sqrt())
}

/// Signed angle from `k` to `q` in the plane.
fn signed_angle(q: &[f64], k: &[f64]) -> f64 {
    (k[0] * q[1] - k[1] * q[0]).atan2(k[0] * q[0] + k[1] * q[1])
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RopeLemmaReport {
    pub schema: u32,
    pub theta1: f64,
    pub delta: f64,
    pub hypothesis_met: bool,
    pub hypothesis_failures: Vec<String>,
    pub max_angle_law_error: f64,
    pub max_inner_product_error: f64,
    pub angle_law_holds: bool,
    pub inner_product_holds: bool,
    /// Present only when the hypothesis holds.
    pub envelope: Option<EnvelopeReport>,
}

impl RopeLemmaReport {
    /// Identities hold and, when asserted, the envelope has no violations.
    pub fn pass(&self) -> bool {
        self.angle_law_holds && self.inner_product_holds && self.envelope.as_ref().is_none_or(EnvelopeReport::pass)
    }
}

/// Checks the relative-angle law `ψ = φ - (i-j)θ₁`, the inner-product
/// identity and, under the hypothesis, the Gaussian-in-distance envelope.
///
/// Envelope constants, with `n_min`/`n_max` the realized range of
/// `‖q_i‖‖k_j‖` over `j <= i` and `α = min(n_min (1 - δ²θ²), n_max (1 - δ²θ²))`:
/// `C_min = e^{α - n_max}/N` at rate `c = n_max`, and
/// `C_max = e^{n_max(2 + 2δ²θ²/π²)}` at rate `c' = n_min/π²`.
pub fn rope_envelope_check(data: &RopeLayerData, theta1: f64, delta: f64) -> Result<RopeLemmaReport> {
    let (n, d) = data.queries.dim();
    if d != 2 {
        return Err(Error::InvalidArgument(format!("envelope check needs d = 2, got d = {d}")));
    }
    if data.keys.dim() != (n, d) || data.map.n() != n {
        return Err(Error::Shape("queries, keys and map disagree".into()));
    }
    if !(theta1 > 0.0) || !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("need theta1 > 0 and delta >= 0, got {theta1}, {delta}")));
    }
    ensure_causal(data.map.view())?;

    let q: Vec<Vec<f64>> = data.queries.rows().into_iter().map(|r| r.to_vec()).collect();
    let k: Vec<Vec<f64>> = data.keys.rows().into_iter().map(|r| r.to_vec()).collect();
    let norm = |v: &[f64]| v[0].hypot(v[1]);
    let theta = [theta1];

    let mut failures = Vec::new();
    if q.iter().chain(&k).any(|v| !(norm(v) > 0.0)) {
        failures.push("zero query or key norm".to_string());
    }
    if (delta + (n as f64 - 1.0)) * theta1 > PI {
        failures.push(format!("(delta + N - 1) * theta1 = {} > pi", (delta + n as f64 - 1.0) * theta1));
    }

    let (mut angle_err, mut ip_err) = (0.0f64, 0.0f64);
    let (mut n_min, mut n_max) = (f64::INFINITY, 0.0f64);
    let mut worst_phi = 0.0f64;
    for i in 0..n {
        let qr = rope_rotate(&q[i], i + 1, &theta)?;
        for j in 0..=i {
            let kr = rope_rotate(&k[j], j + 1, &theta)?;
            let phi = signed_angle(&q[i], &k[j]);
            worst_phi = worst_phi.max(phi.abs());
            let predicted = phi - (i - j) as f64 * theta1;
            let measured = signed_angle(&qr, &kr);
            angle_err = angle_err.max(wrap(measured - predicted).abs());
            let nn = norm(&q[i]) * norm(&k[j]);
            let ip = qr[0] * kr[0] + qr[1] * kr[1];
            ip_err = ip_err.max((ip - nn * predicted.cos()).abs() / nn.max(1.0));
            n_min = n_min.min(nn);
            n_max = n_max.max(nn);
        }
    }
    if worst_phi > delta * theta1 {
        failures.push(format!("max |phi| = {worst_phi} exceeds delta * theta1 = {}", delta * theta1));
    }
    let hypothesis_met = failures.is_empty();

    let envelope = hypothesis_met.then(|| {
        let dt2 = (delta * theta1).powi(2);
        let alpha = (n_min * (1.0 - dt2)).min(n_max * (1.0 - dt2));
        let c_min = (alpha - n_max).exp() / n as f64;
        let c_max = (n_max * (2.0 + 2.0 * dt2 / (PI * PI))).exp();
        let rate_lower = n_max;
        let rate_upper = n_min / (PI * PI);
        let mut entries = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                let x2t2 = ((i - j) as f64 * theta1).powi(2);
                let lower = c_min * (-rate_lower * x2t2).exp();
                let upper = c_max * (-rate_upper * x2t2).exp();
                let value = data.map.get(i, j);
                entries.push(EnvelopeEntry { i: i + 1, j: j + 1, value, lower, upper, pass: within(value, lower, upper) });
            }
        }
        let violations = entries.iter().filter(|e| !e.pass).count();
        EnvelopeReport {
            schema: SCHEMA_VERSION,
            regime: EnvelopeRegime::Rope,
            logit_min: -n_max,
            logit_max: n_max,
            c_min_proof: c_min,
            c_max_proof: c_max,
            c_max_first_row: None,
            rate_lower,
            rate_upper,
            cosine_constant: Some(COSINE_CONSTANT),
            entries,
            violations,
        }
    });

    Ok(RopeLemmaReport {
        schema: SCHEMA_VERSION,
        theta1,
        delta,
        hypothesis_met,
        hypothesis_failures: failures,
        max_angle_law_error: angle_err,
        max_inner_product_error: ip_err,
        angle_law_holds: angle_err <= IDENTITY_TOL,
        inner_product_holds: ip_err <= IDENTITY_TOL,
        envelope,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentReport {
    pub schema: u32,
    pub phi: f64,
    pub segment_angles: Vec<f64>,
    /// `(π/2) √(1/(β_q β_k)) φ`.
    pub bound: f64,
    pub hypothesis_met: bool,
    pub hypothesis_failures: Vec<String>,
    /// 1-based segments exceeding the bound.
    pub violations: Vec<usize>,
}

impl SegmentReport {
    /// `None` when the norm-share hypothesis fails.
    pub fn pass(&self) -> Option<bool> {
        self.hypothesis_met.then(|| self.violations.is_empty())
    }
}

/// Smallest share `‖v_l‖/‖v‖` over the 2-d segments of `v`.
pub fn segment_share(v: ArrayView1<f64>) -> f64 {
    let total = v.dot(&v).sqrt();
    v.to_vec().chunks(2).map(|c| c[0].hypot(c[1])).fold(f64::INFINITY, f64::min) / total
}

pub fn rope_segment_bounds(q: ArrayView1<f64>, k: ArrayView1<f64>, beta_q: f64, beta_k: f64) -> Result<SegmentReport> {
    let d = q.len();
    if k.len() != d {
        return Err(Error::Shape(format!("q has {d} entries, k has {}", k.len())));
    }
    if d == 0 || d % 2 != 0 {
        return Err(Error::OddDimension(d));
    }
    if !(beta_q > 0.0 && beta_k > 0.0) {
        return Err(Error::InvalidArgument("beta_q and beta_k must be positive".into()));
    }
    let segs = |v: ArrayView1<f64>| -> Vec<ndarray::Array1<f64>> { (0..d / 2).map(|l| v.slice(ndarray::s![2 * l..2 * l + 2]).to_owned()).collect() };
    let (qs, ks) = (segs(q), segs(k));
    for (l, (a, b)) in qs.iter().zip(&ks).enumerate() {
        if !(a.dot(a) > 0.0 && b.dot(b) > 0.0) {
            return Err(Error::InvalidArgument(format!("segment {} has zero norm", l + 1)));
        }
    }
    let (nq, nk) = (q.dot(&q).sqrt(), k.dot(&k).sqrt());
    let mut failures = Vec::new();
    for (l, (a, b)) in qs.iter().zip(&ks).enumerate() {
        if a[0].hypot(a[1]) < beta_q * nq * (1.0 - SHARE_SLACK) {
            failures.push(format!("query segment {} below beta_q share", l + 1));
        }
        if b[0].hypot(b[1]) < beta_k * nk * (1.0 - SHARE_SLACK) {
            failures.push(format!("key segment {} below beta_k share", l + 1));
        }
    }
    let phi = vector_angle(q, k);
    let segment_angles: Vec<f64> = qs.iter().zip(&ks).map(|(a, b)| vector_angle(a.view(), b.view())).collect();
    let bound = PI / 2.0 * (1.0 / (beta_q * beta_k)).sqrt() * phi;
    let violations = segment_angles
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > bound)
        .map(|(l, _)| l + 1)
        .collect();
    Ok(SegmentReport {
        schema: SCHEMA_VERSION,
        phi,
        segment_angles,
        bound,
        hypothesis_met: failures.is_empty(),
        hypothesis_failures: failures,
        violations,
    })
}
