//! Single-head masked softmax attention with positional encodings.
//!
//! ```text
//! Z  = (X W_Q)(X W_K)ᵀ            (no √d scaling)
//! A  = softmax_G(Z [+ D])        decay offset D_ij = -(i-j) m for j <= i
//! X' = A X W_V
//! ```
//!
//! Under RoPE the queries and keys are rotated after the weight product,
//! row `i` by the block-diagonal matrix `R_{Θ,i}` with `cos` on the diagonal,
//! `+sin` above and `-sin` below, applied to the column vector. With this
//! convention the angle from key `j` to query `i` becomes `φ - (i-j)θ₁`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::mask::MaskGraph;
use crate::seed::stream_rng;

/// Decay strength used by the experiments: `-ln 0.8`.
pub const DEFAULT_DECAY: f64 = 0.223_143_551_314_209_76;

/// Per-layer query/key/value weights, each `d × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
}

impl LayerWeights {
    pub fn zeros(d: usize) -> Self {
        LayerWeights {
            wq: Array2::zeros((d, d)),
            wk: Array2::zeros((d, d)),
            wv: Array2::zeros((d, d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<LayerWeights>,
    /// Cap on `‖W_Q‖₂` and `‖W_K‖₂`.
    pub c_bound: f64,
}

impl LayerStack {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.layers.first().map_or(0, LayerWeights::dim)
    }

    /// Stack with zero query/key weights and identity values: every map is
    /// uniform over its neighbourhood.
    pub fn uniform(d: usize, depth: usize) -> Self {
        let layers = (0..depth)
            .map(|_| LayerWeights {
                wq: Array2::zeros((d, d)),
                wk: Array2::zeros((d, d)),
                wv: Array2::eye(d),
            })
            .collect();
        LayerStack { layers, c_bound: 0.0 }
    }
}

fn gaussian_matrix(rng: &mut impl rand::Rng, d: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((d, d), || StandardNormal.sample(rng))
}

fn rescale_to(mut w: Array2<f64>, cap: f64) -> Array2<f64> {
    for _ in 0..4 {
        let s = spectral_norm(w.view());
        if s == 0.0 || ((s - cap) / cap).abs() < 1e-13 {
            break;
        }
        w *= cap / s;
    }
    w
}

/// Random stack with `‖W_Q‖₂ = ‖W_K‖₂ = c_bound` and `‖W_V‖₂ = 1`.
///
/// Every partial product of value matrices then has norm at most one, so
/// token trajectories stay bounded.
pub fn init_stack(d: usize, depth: usize, c_bound: f64, seed: u64) -> Result<LayerStack> {
    if d == 0 || depth == 0 {
        return Err(Error::InvalidArgument("d and depth must be >= 1".into()));
    }
    if !(c_bound > 0.0) || !c_bound.is_finite() {
        return Err(Error::InvalidArgument(format!("c_bound must be > 0, got {c_bound}")));
    }
    let layers = (0..depth)
        .map(|t| {
            let mut rng = stream_rng(seed, "stack", t as u64);
            let wq = rescale_to(gaussian_matrix(&mut rng, d), c_bound);
            let wk = rescale_to(gaussian_matrix(&mut rng, d), c_bound);
            let wv = rescale_to(gaussian_matrix(&mut rng, d), 1.0);
            LayerWeights { wq, wk, wv }
        })
        .collect();
    Ok(LayerStack { layers, c_bound })
}

/// Base rotation angles for RoPE.
#[derive(Debug, Clone, PartialEq)]
pub enum RopeAngles {
    /// `θ_k = base^{-2(k-1)/d}`.
    Standard { base: f64 },
    Explicit(Vec<f64>),
}

impl RopeAngles {
    pub fn resolve(&self, d: usize) -> Result<Vec<f64>> {
        if d % 2 != 0 {
            return Err(Error::OddDimension(d));
        }
        let theta = match self {
            RopeAngles::Standard { base } => (0..d / 2)
                .map(|k| base.powf(-2.0 * k as f64 / d as f64))
                .collect(),
            RopeAngles::Explicit(v) => {
                if v.len() != d / 2 {
                    return Err(Error::InvalidPe(format!(
                        "{} rope angles given for d={d} (need {})",
                        v.len(),
                        d / 2
                    )));
                }
                v.clone()
            }
        };
        Ok(theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PeMode {
    NoPe,
    /// Input-additive; leaves the layer computation unchanged.
    Sinusoidal,
    /// `symmetric` applies `-|i-j| m` on every allowed entry instead of only
    /// on `j <= i`.
    Decay { m: f64, symmetric: bool },
    Rope(RopeAngles),
}

impl PeMode {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            PeMode::Decay { m, .. } if !(*m > 0.0) || !m.is_finite() => {
                Err(Error::InvalidPe(format!("decay strength m must be > 0, got {m}")))
            }
            PeMode::Rope(a) => {
                let theta = a.resolve(d)?;
                if theta.iter().any(|t| !(*t >= 0.0)) {
                    return Err(Error::InvalidPe("rope angles must be non-negative".into()));
                }
                // The standard schedule starts at θ₁ = 1 and shrinks; only
                // explicit lists are held to the ascending order.
                if matches!(a, RopeAngles::Explicit(_)) && theta.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidPe("rope angles must be non-decreasing".into()));
                }
                Ok(())
            }
            PeMode::Sinusoidal if d % 2 != 0 => Err(Error::OddDimension(d)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeMode::NoPe => write!(f, "nope"),
            PeMode::Sinusoidal => write!(f, "sin"),
            PeMode::Decay { m, symmetric: false } => write!(f, "decay:m={m}"),
            PeMode::Decay { m, symmetric: true } => write!(f, "decay-sym:m={m}"),
            PeMode::Rope(RopeAngles::Standard { base }) => write!(f, "rope:base={base}"),
            PeMode::Rope(RopeAngles::Explicit(v)) => {
                let parts: Vec<String> = v.iter().map(|t| t.to_string()).collect();
                write!(f, "rope:theta={}", parts.join("/"))
            }
        }
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidPe(format!("`{s}` is not a number ({what})")))
}

impl FromStr for PeMode {
    type Err = Error;

    /// Accepted forms: `nope`, `sin`, `decay`, `decay:m=<x>`,
    /// `decay-sym:m=<x>`, `rope`, `rope:base=<x>`, `rope:theta=<t1>/<t2>/...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, param) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b.split_once('=').ok_or_else(|| {
                Error::InvalidPe(format!("expected key=value after `{a}:`"))
            })?)),
            None => (s, None),
        };
        let pe = match (name, param) {
            ("nope", None) => PeMode::NoPe,
            ("sin", None) | ("sinusoidal", None) => PeMode::Sinusoidal,
            ("decay", None) => PeMode::Decay { m: DEFAULT_DECAY, symmetric: false },
            ("decay", Some(("m", v))) => PeMode::Decay { m: parse_f64(v, "m")?, symmetric: false },
            ("decay-sym", Some(("m", v))) => PeMode::Decay { m: parse_f64(v, "m")?, symmetric: true },
            ("rope", None) => PeMode::Rope(RopeAngles::Standard { base: 10_000.0 }),
            ("rope", Some(("base", v))) => {
                PeMode::Rope(RopeAngles::Standard { base: parse_f64(v, "base")? })
            }
            ("rope", Some(("theta", v))) => PeMode::Rope(RopeAngles::Explicit(
                v.split('/').map(|t| parse_f64(t, "theta")).collect::<Result<_>>()?,
            )),
            _ => return Err(Error::InvalidPe(format!("unknown positional encoding `{s}`"))),
        };
        if let PeMode::Decay { m, .. } = pe {
            if !(m > 0.0) {
                return Err(Error::InvalidPe(format!("decay strength m must be > 0, got {m}")));
            }
        }
        Ok(pe)
    }
}

impl Serialize for PeMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PeMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Row-stochastic attention weights of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap(pub Array2<f64>);

impl AttentionMap {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    /// 0-based entry.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[[row, col]]
    }
}

/// `Z = (X W_Q)(X W_K)ᵀ`.
pub fn raw_scores(x: ArrayView2<f64>, wq: ArrayView2<f64>, wk: ArrayView2<f64>) -> Result<Array2<f64>> {
    let d = x.ncols();
    if wq.nrows() != d || wk.nrows() != d || wq.ncols() != wk.ncols() {
        return Err(Error::Shape(format!(
            "x is {:?}, wq {:?}, wk {:?}",
            x.dim(),
            wq.dim(),
            wk.dim()
        )));
    }
    let q = x.dot(&wq);
    let k = x.dot(&wk);
    Ok(q.dot(&k.t()))
}

/// `Z + D` with `D_ij = -(i-j) m` for `j <= i` and zero above the diagonal.
pub fn apply_decay(z: ArrayView2<f64>, m: f64) -> Array2<f64> {
    let mut out = z.to_owned();
    for ((i, j), v) in out.indexed_iter_mut() {
        if j <= i {
            *v -= (i - j) as f64 * m;
        }
    }
    out
}

fn apply_symmetric_decay(z: ArrayView2<f64>, m: f64) -> Array2<f64> {
    let mut out = z.to_owned();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v -= i.abs_diff(j) as f64 * m;
    }
    out
}

/// Rotates consecutive coordinate pairs of `v` by `pos · θ_k`.
pub fn rope_rotate(v: &[f64], pos: usize, theta: &[f64]) -> Result<Vec<f64>> {
    if v.len() % 2 != 0 {
        return Err(Error::OddDimension(v.len()));
    }
    if theta.len() != v.len() / 2 {
        return Err(Error::Shape(format!(
            "{} angles for a vector of length {}",
            theta.len(),
            v.len()
        )));
    }
    let mut out = v.to_vec();
    rotate_in_place(&mut out, pos as f64, theta);
    Ok(out)
}

/// In-place rotation by `scale · θ_k` per pair. `scale = -pos` inverts.
pub fn rotate_in_place(v: &mut [f64], scale: f64, theta: &[f64]) {
    for (pair, &th) in v.chunks_exact_mut(2).zip(theta) {
        let (s, c) = (scale * th).sin_cos();
        let (a, b) = (pair[0], pair[1]);
        pair[0] = c * a + s * b;
        pair[1] = -s * a + c * b;
    }
}

/// Rotates row `r` of `m` by position `r + 1`.
pub fn rotate_rows(m: &mut Array2<f64>, theta: &[f64]) {
    for (r, mut row) in m.axis_iter_mut(Axis(0)).enumerate() {
        let slice = row.as_slice_mut().expect("rows of an owned standard-layout array are contiguous");
        rotate_in_place(slice, (r + 1) as f64, theta);
    }
}

/// Softmax over each row's neighbourhood, stabilised by the row maximum.
pub fn masked_softmax(z: ArrayView2<f64>, g: &MaskGraph) -> AttentionMap {
    let n = g.n();
    assert_eq!(z.dim(), (n, n), "score matrix must be n × n");
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        let mut mx = f64::NEG_INFINITY;
        for j in 0..n {
            if g.allows(i, j) {
                mx = mx.max(z[[i, j]]);
            }
        }
        let mut total = 0.0;
        for j in 0..n {
            if g.allows(i, j) {
                let e = (z[[i, j]] - mx).exp();
                a[[i, j]] = e;
                total += e;
            }
        }
        for j in 0..n {
            a[[i, j]] /= total;
        }
    }
    AttentionMap(a)
}

/// Everything one layer computes, kept for the bound checks.
#[derive(Debug, Clone)]
pub struct LayerOutput {
    pub map: AttentionMap,
    /// Logits before any decay offset (rotated under RoPE).
    pub scores: Array2<f64>,
    /// `X W_Q` and `X W_K` before rotation.
    pub queries: Array2<f64>,
    pub keys: Array2<f64>,
    pub next: Array2<f64>,
}

/// `X' = A X W_V` for a single layer.
pub fn layer_forward(
    x: ArrayView2<f64>,
    w: &LayerWeights,
    g: &MaskGraph,
    pe: &PeMode,
    layer_index: usize,
) -> Result<(AttentionMap, Array2<f64>)> {
    let out = layer_forward_detailed(x, w, g, pe, 1.0, layer_index)?;
    Ok((out.map, out.next))
}

pub fn layer_forward_detailed(
    x: ArrayView2<f64>,
    w: &LayerWeights,
    g: &MaskGraph,
    pe: &PeMode,
    temperature: f64,
    layer_index: usize,
) -> Result<LayerOutput> {
    let (n, d) = x.dim();
    if n != g.n() {
        return Err(Error::Shape(format!("x has {n} rows but the mask has {} nodes", g.n())));
    }
    if w.wq.dim() != (d, d) || w.wk.dim() != (d, d) || w.wv.dim() != (d, d) {
        return Err(Error::Shape(format!("layer {layer_index} weights do not match d={d}")));
    }
    let queries = x.dot(&w.wq);
    let keys = x.dot(&w.wk);
    let mut scores = match pe {
        PeMode::Rope(angles) => {
            let theta = angles.resolve(d)?;
            let mut q = queries.clone();
            let mut k = keys.clone();
            rotate_rows(&mut q, &theta);
            rotate_rows(&mut k, &theta);
            q.dot(&k.t())
        }
        _ => queries.dot(&keys.t()),
    };
    if temperature != 1.0 {
        scores /= temperature;
    }
    let logits = match pe {
        PeMode::Decay { m, symmetric: false } => apply_decay(scores.view(), *m),
        PeMode::Decay { m, symmetric: true } => apply_symmetric_decay(scores.view(), *m),
        _ => scores.clone(),
    };
    let map = masked_softmax(logits.view(), g);
    let next = map.0.dot(&x).dot(&w.wv);
    if !next.iter().all(|v| v.is_finite()) || !map.0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { layer: layer_index });
    }
    Ok(LayerOutput { map, scores, queries, keys, next })
}

/// Interleaved sine/cosine table with 0-based positions:
/// `(p, 2k) = sin(p / 10000^{2k/d})`, `(p, 2k+1) = cos(p / 10000^{2k/d})`.
pub fn sinusoidal_pe(n: usize, d: usize) -> Result<Array2<f64>> {
    if d % 2 != 0 {
        return Err(Error::OddDimension(d));
    }
    let mut pe = Array2::zeros((n, d));
    for p in 0..n {
        for k in 0..d / 2 {
            let freq = 10_000f64.powf(2.0 * k as f64 / d as f64);
            let (s, c) = (p as f64 / freq).sin_cos();
            pe[[p, 2 * k]] = s;
            pe[[p, 2 * k + 1]] = c;
        }
    }
    Ok(pe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::MaskKind;
    use ndarray::array;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    #[test]
    fn identity_scores() {
        let x = Array2::<f64>::eye(2);
        let z = raw_scores(x.view(), x.view(), x.view()).unwrap();
        assert_eq!(z, Array2::<f64>::eye(2));
    }

    #[test]
    fn raw_scores_shape_error() {
        let x = Array2::<f64>::zeros((3, 2));
        let w = Array2::<f64>::zeros((3, 3));
        assert!(matches!(raw_scores(x.view(), w.view(), w.view()), Err(Error::Shape(_))));
    }

    #[test]
    fn decay_row() {
        let z = Array2::zeros((3, 3));
        let out = apply_decay(z.view(), LN_2);
        assert!((out[[2, 0]] + 2.0 * LN_2).abs() < 1e-15);
        assert!((out[[2, 1]] + LN_2).abs() < 1e-15);
        assert_eq!(out[[2, 2]], 0.0);
        assert_eq!(out[[0, 2]], 0.0);
    }

    #[test]
    fn decay_diagonal_untouched() {
        let z = array![[1.5, -2.0], [0.25, 3.0]];
        let out = apply_decay(z.view(), 0.7);
        for i in 0..2 {
            assert_eq!(out[[i, i]], z[[i, i]]);
        }
    }

    #[test]
    fn decay_default_strength() {
        assert!((DEFAULT_DECAY + 0.8f64.ln()).abs() < 1e-16);
        let out = apply_decay(Array2::zeros((2, 2)).view(), -(0.8f64.ln()));
        assert!((out[[1, 0]] - 0.8f64.ln()).abs() < 1e-15);
        assert!((out[[1, 0]] + 0.2231).abs() < 1e-4);
    }

    #[test]
    fn rope_sign_convention() {
        let v = rope_rotate(&[1.0, 0.0], 1, &[FRAC_PI_2]).unwrap();
        assert!(v[0].abs() < 1e-15 && (v[1] + 1.0).abs() < 1e-15, "{v:?}");
        let id = rope_rotate(&[0.3, -2.0, 1.0, 4.0], 0, &[0.4, 1.1]).unwrap();
        assert_eq!(id, vec![0.3, -2.0, 1.0, 4.0]);
        assert!(matches!(rope_rotate(&[1.0, 2.0, 3.0], 1, &[0.1]), Err(Error::OddDimension(3))));
    }

    #[test]
    fn softmax_uniform_causal() {
        let g = MaskGraph::new(MaskKind::Causal, 2).unwrap();
        let a = masked_softmax(Array2::zeros((2, 2)).view(), &g);
        assert_eq!(a.0, array![[1.0, 0.0], [0.5, 0.5]]);
        let g = MaskGraph::new(MaskKind::Causal, 5).unwrap();
        let a = masked_softmax(Array2::zeros((5, 5)).view(), &g);
        for i in 0..5 {
            for j in 0..=i {
                assert!((a.get(i, j) - 1.0 / (i + 1) as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let g = MaskGraph::new(MaskKind::Complete, 3).unwrap();
        let z = array![[1e4, -1e4, 0.0], [800.0, 800.0, 800.0], [-1e5, -1e5, -1e5]];
        let a = masked_softmax(z.view(), &g);
        assert!(a.0.iter().all(|v| v.is_finite()));
        assert!((a.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((a.get(1, 2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_token_layer() {
        let g = MaskGraph::new(MaskKind::Causal, 1).unwrap();
        let stack = init_stack(3, 1, 1.0, 4).unwrap();
        let x = array![[0.2, -0.4, 0.9]];
        let (a, next) = layer_forward(x.view(), &stack.layers[0], &g, &PeMode::NoPe, 0).unwrap();
        assert_eq!(a.0, array![[1.0]]);
        let expect = x.dot(&stack.layers[0].wv);
        assert!((&next - &expect).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_input_gives_uniform_map() {
        let g = MaskGraph::new(MaskKind::Prefix { prefix_len: 2 }, 4).unwrap();
        let stack = init_stack(4, 1, 2.0, 9).unwrap();
        let (a, _) =
            layer_forward(Array2::zeros((4, 4)).view(), &stack.layers[0], &g, &PeMode::NoPe, 0)
                .unwrap();
        for i in 1..=4 {
            let nb = g.neighbors(i).unwrap();
            for &j in &nb {
                assert!((a.get(i - 1, j - 1) - 1.0 / nb.len() as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn init_stack_caps_and_determinism() {
        let s = init_stack(4, 2, 1.0, 7).unwrap();
        for l in &s.layers {
            assert!((spectral_norm(l.wq.view()) - 1.0).abs() < 1e-6);
            assert!((spectral_norm(l.wk.view()) - 1.0).abs() < 1e-6);
            assert!((spectral_norm(l.wv.view()) - 1.0).abs() < 1e-6);
        }
        assert_eq!(s, init_stack(4, 2, 1.0, 7).unwrap());
        assert_ne!(s, init_stack(4, 2, 1.0, 8).unwrap());

        let s = init_stack(1, 1, 0.5, 0).unwrap();
        assert!((s.layers[0].wq[[0, 0]].abs() - 0.5).abs() < 1e-15);
        assert!((s.layers[0].wk[[0, 0]].abs() - 0.5).abs() < 1e-15);
        assert!((s.layers[0].wv[[0, 0]].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn init_stack_rejects_bad_args() {
        assert!(init_stack(0, 1, 1.0, 0).is_err());
        assert!(init_stack(2, 0, 1.0, 0).is_err());
        assert!(init_stack(2, 1, 0.0, 0).is_err());
    }

    #[test]
    fn sinusoidal_table() {
        let pe = sinusoidal_pe(3, 4).unwrap();
        assert_eq!(pe.row(0).to_vec(), vec![0.0, 1.0, 0.0, 1.0]);
        assert!((pe[[1, 0]] - 1f64.sin()).abs() < 1e-15);
        assert!((pe[[1, 0]] - 0.8415).abs() < 1e-4);
        assert!(pe.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(matches!(sinusoidal_pe(3, 5), Err(Error::OddDimension(5))));
    }

    #[test]
    fn pe_parse_roundtrip() {
        for s in ["nope", "sin", "decay:m=0.5", "decay-sym:m=0.25", "rope:base=10000", "rope:theta=0.1/0.2"] {
            let pe: PeMode = s.parse().unwrap();
            assert_eq!(pe.to_string(), s);
        }
        assert_eq!(
            "decay".parse::<PeMode>().unwrap(),
            PeMode::Decay { m: DEFAULT_DECAY, symmetric: false }
        );
        assert!("decay:m=-1".parse::<PeMode>().is_err());
        assert!("alibi".parse::<PeMode>().is_err());
    }

    #[test]
    fn rope_validation() {
        assert!(PeMode::Rope(RopeAngles::Explicit(vec![0.2, 0.1])).validate(4).is_err());
        assert!(PeMode::Rope(RopeAngles::Explicit(vec![0.1])).validate(4).is_err());
        assert!(PeMode::Rope(RopeAngles::Standard { base: 10_000.0 }).validate(3).is_err());
        let t = RopeAngles::Standard { base: 10_000.0 }.resolve(4).unwrap();
        assert_eq!(t[0], 1.0);
        assert!((t[1] - 0.01).abs() < 1e-15);
        assert!(PeMode::Rope(RopeAngles::Standard { base: 10_000.0 }).validate(8).is_ok());
    }
}
