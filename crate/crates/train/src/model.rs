//! Attention-only network with a three-layer ReLU classifier.
//!
//! A batch is stacked as a `(B·N) × d` matrix so the projections
//! `X W_Q`, `X W_K`, `X W_V` and their weight gradients are single large
//! products; only the `N × N` attention products run per sample. Row `r`
//! of the stack is token `(r mod N) + 1` of sample `r / N`.
//!
//! Per layer, with `V = X W_V`:
//!
//! ```text
//! A = softmax_G(Q Kᵀ [+ D])     (Q, K rotated under RoPE)
//! X ← A V   or   X ← X + A V
//! ```
//!
//! The classifier reads the final row (the query token):
//! `logits = relu(relu(h W₁ + b₁) W₂ + b₂) W₃ + b₃`.
//!
//! Everything is generic over [`Real`] so training can run in `f32` while
//! gradient checks use `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{concatenate, s, Array1, Array2, Array3, ArrayView2, ArrayViewMut2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use posbias_core::seed::stream_rng;
use posbias_core::{sinusoidal_pe, AttentionMap, MaskGraph, MaskKind, PeMode};

use crate::error::{Error, Result};

pub trait Real:
    LinalgScalar
    + ScalarOperand
    + Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Send
    + Sync
    + Debug
    + Display
    + 'static
{
    const NAME: &'static str;
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}

pub(crate) fn cast<F: Real>(v: f64) -> F {
    F::from_f64(v).expect("finite f64 converts")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub depth: usize,
    pub residual: bool,
    pub mask: MaskKind,
    pub pe: PeMode,
    pub dim: usize,
    /// Classifier hidden width.
    pub hidden: usize,
    pub l_labels: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            depth: 2,
            residual: false,
            mask: MaskKind::Causal,
            pe: PeMode::NoPe,
            dim: 64,
            hidden: 64,
            l_labels: 32,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self, tokens: usize) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::ModelConfig("depth must be >= 1".into()));
        }
        if self.dim == 0 || self.hidden == 0 || self.l_labels == 0 {
            return Err(Error::ModelConfig("dim, hidden and l_labels must be positive".into()));
        }
        self.mask.validate(tokens)?;
        self.pe.validate(self.dim)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttnWeights<F> {
    pub wq: Array2<F>,
    pub wk: Array2<F>,
    pub wv: Array2<F>,
}

/// Trainable parameters; gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub layers: Vec<AttnWeights<F>>,
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
    pub w3: Array2<F>,
    pub b3: Array1<F>,
}

impl<F: Real> Params<F> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (d, h, l) = (cfg.dim, cfg.hidden, cfg.l_labels);
        let sq = || Array2::zeros((d, d));
        Params {
            layers: (0..cfg.depth).map(|_| AttnWeights { wq: sq(), wk: sq(), wv: sq() }).collect(),
            w1: Array2::zeros((d, h)),
            b1: Array1::zeros(h),
            w2: Array2::zeros((h, h)),
            b2: Array1::zeros(h),
            w3: Array2::zeros((h, l)),
            b3: Array1::zeros(l),
        }
    }

    /// Weights i.i.d. normal with standard deviation `1/√fan_in`, biases zero.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = stream_rng(seed, "init", 0);
        let mut p = Self::zeros(cfg);
        for w in p.weight_matrices_mut() {
            let sd = 1.0 / (w.nrows() as f64).sqrt();
            w.mapv_inplace(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                cast(z * sd)
            });
        }
        p
    }

    fn weight_matrices_mut(&mut self) -> Vec<&mut Array2<F>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend([&mut l.wq, &mut l.wk, &mut l.wv]);
        }
        out.extend([&mut self.w1, &mut self.w2, &mut self.w3]);
        out
    }

    /// Every tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = Vec::new();
        for l in &self.layers {
            out.extend([l.wq.as_slice(), l.wk.as_slice(), l.wv.as_slice()].map(|s| s.expect("standard layout")));
        }
        out.extend(
            [self.w1.as_slice(), self.b1.as_slice(), self.w2.as_slice(), self.b2.as_slice(), self.w3.as_slice(), self.b3.as_slice()]
                .map(|s| s.expect("standard layout")),
        );
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::new();
        for l in &mut self.layers {
            out.extend([l.wq.as_slice_mut(), l.wk.as_slice_mut(), l.wv.as_slice_mut()].map(|s| s.expect("standard layout")));
        }
        out.extend(
            [
                self.w1.as_slice_mut(),
                self.b1.as_slice_mut(),
                self.w2.as_slice_mut(),
                self.b2.as_slice_mut(),
                self.w3.as_slice_mut(),
                self.b3.as_slice_mut(),
            ]
            .map(|s| s.expect("standard layout")),
        );
        out
    }

    /// Names matching [`Params::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in 0..self.layers.len() {
            out.extend(["wq", "wk", "wv"].map(|n| format!("layer{t}.{n}")));
        }
        out.extend(["w1", "b1", "w2", "b2", "w3", "b3"].map(String::from));
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn convert<G: Real>(&self) -> Params<G> {
        let c2 = |a: &Array2<F>| a.mapv(|v| cast::<G>(v.to_f64().expect("real")));
        let c1 = |a: &Array1<F>| a.mapv(|v| cast::<G>(v.to_f64().expect("real")));
        Params {
            layers: self.layers.iter().map(|l| AttnWeights { wq: c2(&l.wq), wk: c2(&l.wk), wv: c2(&l.wv) }).collect(),
            w1: c2(&self.w1),
            b1: c1(&self.b1),
            w2: c2(&self.w2),
            b2: c1(&self.b2),
            w3: c2(&self.w3),
            b3: c1(&self.b3),
        }
    }
}

/// Mask, offsets and rotation tables for a fixed sequence length.
#[derive(Debug, Clone)]
pub struct Network<F> {
    pub cfg: ModelConfig,
    pub graph: MaskGraph,
    n: usize,
    allowed: Vec<bool>,
    offsets: Option<Array2<F>>,
    /// `cos`, `sin` of `(r+1)·θ_k`, each `N × d/2`.
    rope: Option<(Array2<F>, Array2<F>)>,
    input_pe: Option<Array2<F>>,
}

/// Which rows the final layer computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rows {
    /// Every layer computes every row; needed for attention maps.
    All,
    /// The final layer computes only the query row, all the classifier reads.
    QueryOnly,
}

pub struct LayerCache<F> {
    /// First query row within each sample (0 for a full layer).
    r0: usize,
    x: Array2<F>,
    /// Query-row inputs, `B·(N-r0) × d`; empty when `r0 = 0` (then `x`).
    qx: Option<Array2<F>>,
    /// Rotated under RoPE.
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    /// `(B, N - r0, N)`.
    pub maps: Array3<F>,
}

pub struct Cache<F> {
    pub layers: Vec<LayerCache<F>>,
    pub h0: Array2<F>,
    a1: Array2<F>,
    r1: Array2<F>,
    a2: Array2<F>,
    r2: Array2<F>,
    pub logits: Array2<F>,
}

impl<F: Real> Network<F> {
    pub fn new(cfg: &ModelConfig, tokens: usize) -> Result<Self> {
        cfg.validate(tokens)?;
        let n = tokens;
        let graph = MaskGraph::new(cfg.mask, n)?;
        let allowed = (0..n * n).map(|e| graph.allows(e / n, e % n)).collect();
        let offsets = match cfg.pe {
            PeMode::Decay { m, symmetric } => Some(Array2::from_shape_fn((n, n), |(i, j)| {
                if symmetric || j <= i {
                    cast(-(i.abs_diff(j) as f64) * m)
                } else {
                    F::zero()
                }
            })),
            _ => None,
        };
        let rope = match &cfg.pe {
            PeMode::Rope(angles) => {
                let theta = angles.resolve(cfg.dim)?;
                let ang = |r: usize, k: usize| (r + 1) as f64 * theta[k];
                Some((
                    Array2::from_shape_fn((n, cfg.dim / 2), |(r, k)| cast(ang(r, k).cos())),
                    Array2::from_shape_fn((n, cfg.dim / 2), |(r, k)| cast(ang(r, k).sin())),
                ))
            }
            _ => None,
        };
        let input_pe = match cfg.pe {
            PeMode::Sinusoidal => Some(sinusoidal_pe(n, cfg.dim)?.mapv(cast)),
            _ => None,
        };
        Ok(Network { cfg: cfg.clone(), graph, n, allowed, offsets, rope, input_pe })
    }

    pub fn tokens(&self) -> usize {
        self.n
    }

    fn check_params(&self, p: &Params<F>) -> Result<()> {
        let (d, h, l) = (self.cfg.dim, self.cfg.hidden, self.cfg.l_labels);
        let ok = p.layers.len() == self.cfg.depth
            && p.layers.iter().all(|w| w.wq.dim() == (d, d) && w.wk.dim() == (d, d) && w.wv.dim() == (d, d))
            && p.w1.dim() == (d, h)
            && p.b1.len() == h
            && p.w2.dim() == (h, h)
            && p.b2.len() == h
            && p.w3.dim() == (h, l)
            && p.b3.len() == l;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("parameters do not match the model config".into()))
        }
    }

    /// Stacks `(B, N, d)` into `(B·N, d)` and adds the input encoding.
    fn stack_input(&self, tokens: &Array3<F>) -> Result<Array2<F>> {
        let (b, n, d) = tokens.dim();
        if n != self.n || d != self.cfg.dim {
            return Err(Error::Shape(format!("batch is {b}×{n}×{d}, model expects N={} d={}", self.n, self.cfg.dim)));
        }
        let mut x = tokens.to_owned().into_shape_with_order((b * n, d)).map_err(|e| Error::Shape(e.to_string()))?;
        if let Some(pe) = &self.input_pe {
            for mut blk in x.axis_chunks_iter_mut(Axis(0), n) {
                blk += pe;
            }
        }
        Ok(x)
    }

    /// Rotates row `i` of `m` by position `r0 + (i mod rows) + 1`.
    fn rotate(&self, m: &mut Array2<F>, r0: usize, inverse: bool) {
        let Some((cos, sin)) = &self.rope else { return };
        let rows = self.n - r0;
        for (i, mut row) in m.axis_iter_mut(Axis(0)).enumerate() {
            let row = row.as_slice_mut().expect("contiguous row");
            let r = r0 + i % rows;
            let (c, s) = (cos.row(r), sin.row(r));
            for (k, pair) in row.chunks_exact_mut(2).enumerate() {
                let (a, b) = (pair[0], pair[1]);
                let sk = if inverse { -s[k] } else { s[k] };
                pair[0] = c[k] * a + sk * b;
                pair[1] = -sk * a + c[k] * b;
            }
        }
    }

    /// Masked softmax of score rows `r0..N` in place.
    fn softmax_rows(&self, mut z: ArrayViewMut2<F>, r0: usize) {
        let n = self.n;
        for (local, mut row) in z.rows_mut().into_iter().enumerate() {
            let i = r0 + local;
            let allowed = &self.allowed[i * n..(i + 1) * n];
            if let Some(off) = &self.offsets {
                row += &off.row(i);
            }
            let mx = row.iter().zip(allowed).filter(|(_, &a)| a).map(|(v, _)| *v).fold(F::neg_infinity(), F::max);
            let mut total = F::zero();
            for (v, &a) in row.iter_mut().zip(allowed) {
                *v = if a { (*v - mx).exp() } else { F::zero() };
                total += *v;
            }
            row.mapv_inplace(|v| v / total);
        }
    }

    /// Rows `r0..N` of every sample in a `(B·N) × d` stack.
    fn gather_rows(&self, x: &Array2<F>, r0: usize) -> Array2<F> {
        let n = self.n;
        let rows = n - r0;
        let batch = x.nrows() / n;
        let mut out = Array2::zeros((batch * rows, x.ncols()));
        for b in 0..batch {
            out.slice_mut(s![b * rows..(b + 1) * rows, ..]).assign(&x.slice(s![b * n + r0..(b + 1) * n, ..]));
        }
        out
    }

    fn scatter_add_rows(&self, into: &mut Array2<F>, src: &Array2<F>, r0: usize) {
        let n = self.n;
        let rows = n - r0;
        for b in 0..into.nrows() / n {
            let mut dst = into.slice_mut(s![b * n + r0..(b + 1) * n, ..]);
            dst += &src.slice(s![b * rows..(b + 1) * rows, ..]);
        }
    }

    pub fn forward(&self, p: &Params<F>, tokens: &Array3<F>, rows: Rows) -> Result<Cache<F>> {
        self.check_params(p)?;
        let batch = tokens.dim().0;
        let (n, d) = (self.n, self.cfg.dim);
        let mut x = self.stack_input(tokens)?;
        let mut layers = Vec::with_capacity(p.layers.len());
        for (t, w) in p.layers.iter().enumerate() {
            let last = t + 1 == p.layers.len();
            let r0 = if last && rows == Rows::QueryOnly { n - 1 } else { 0 };
            let qrows = n - r0;
            let qx = (r0 > 0).then(|| self.gather_rows(&x, r0));
            let mut q = qx.as_ref().unwrap_or(&x).dot(&w.wq);
            let kv = x.dot(&concatenate![Axis(1), w.wk, w.wv]);
            let mut k = kv.slice(s![.., ..d]).to_owned();
            let v = kv.slice(s![.., d..]).to_owned();
            self.rotate(&mut q, r0, false);
            self.rotate(&mut k, 0, false);
            let mut maps = Array3::<F>::zeros((batch, qrows, n));
            let mut u = Array2::<F>::zeros((batch * qrows, d));
            for b in 0..batch {
                let kr = s![b * n..(b + 1) * n, ..];
                let qr = s![b * qrows..(b + 1) * qrows, ..];
                let mut z = maps.index_axis_mut(Axis(0), b);
                abt(q.slice(qr), k.slice(kr), z.view_mut());
                self.softmax_rows(z.view_mut(), r0);
                ab(z.view(), v.slice(kr), u.slice_mut(qr));
            }
            if self.cfg.residual {
                u += qx.as_ref().unwrap_or(&x);
            }
            if !u.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { layer: t });
            }
            layers.push(LayerCache { r0, x, qx, q, k, v, maps });
            x = u;
        }
        let last_rows = x.nrows() / batch;
        let h0 = Array2::from_shape_fn((batch, d), |(b, c)| x[[b * last_rows + last_rows - 1, c]]);
        let a1 = h0.dot(&p.w1) + &p.b1;
        let r1 = a1.mapv(relu);
        let a2 = r1.dot(&p.w2) + &p.b2;
        let r2 = a2.mapv(relu);
        let logits = r2.dot(&p.w3) + &p.b3;
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { layer: p.layers.len() });
        }
        Ok(Cache { layers, h0, a1, r1, a2, r2, logits })
    }

    pub fn logits(&self, p: &Params<F>, tokens: &Array3<F>) -> Result<Array2<F>> {
        Ok(self.forward(p, tokens, Rows::QueryOnly)?.logits)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_grads(&self, p: &Params<F>, tokens: &Array3<F>, targets: &[usize]) -> Result<(F, Params<F>)> {
        self.loss_and_grads_with(p, tokens, targets, Rows::QueryOnly)
    }

    pub fn loss_and_grads_with(&self, p: &Params<F>, tokens: &Array3<F>, targets: &[usize], rows: Rows) -> Result<(F, Params<F>)> {
        let cache = self.forward(p, tokens, rows)?;
        let (loss, dlogits) = cross_entropy(cache.logits.view(), targets)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { layer: p.layers.len() });
        }
        Ok((loss, self.backward(p, &cache, dlogits)))
    }

    fn backward(&self, p: &Params<F>, c: &Cache<F>, dlogits: Array2<F>) -> Params<F> {
        let mut g = Params::zeros(&self.cfg);
        let (n, d) = (self.n, self.cfg.dim);
        let batch = dlogits.nrows();

        g.w3 = c.r2.t().dot(&dlogits);
        g.b3 = dlogits.sum_axis(Axis(0));
        let mut da2 = dlogits.dot(&p.w3.t());
        relu_mask(&mut da2, &c.a2);
        g.w2 = c.r1.t().dot(&da2);
        g.b2 = da2.sum_axis(Axis(0));
        let mut da1 = da2.dot(&p.w2.t());
        relu_mask(&mut da1, &c.a1);
        g.w1 = c.h0.t().dot(&da1);
        g.b1 = da1.sum_axis(Axis(0));
        let dh0 = da1.dot(&p.w1.t());

        // Gradient with respect to the output rows of the current layer.
        let out_rows = n - c.layers.last().map_or(0, |l| l.r0);
        let mut dx = Array2::<F>::zeros((batch * out_rows, d));
        for b in 0..batch {
            dx.row_mut(b * out_rows + out_rows - 1).assign(&dh0.row(b));
        }

        for (t, (lc, w)) in c.layers.iter().zip(&p.layers).enumerate().rev() {
            let (r0, qrows) = (lc.r0, n - lc.r0);
            let gu = dx;
            let mut dq = Array2::<F>::zeros((batch * qrows, d));
            let mut dkv = Array2::<F>::zeros((batch * n, 2 * d));
            let mut da = Array2::<F>::zeros((qrows, n));
            for b in 0..batch {
                let kr = s![b * n..(b + 1) * n, ..];
                let qr = s![b * qrows..(b + 1) * qrows, ..];
                let a = lc.maps.index_axis(Axis(0), b);
                let gb = gu.slice(qr);
                abt(gb, lc.v.slice(kr), da.view_mut());
                atb(a, gb, dkv.slice_mut(s![b * n..(b + 1) * n, d..]));
                softmax_backward(a, &mut da);
                ab(da.view(), lc.k.slice(kr), dq.slice_mut(qr));
                atb(da.view(), lc.q.slice(qr), dkv.slice_mut(s![b * n..(b + 1) * n, ..d]));
            }
            self.rotate(&mut dq, r0, true);
            {
                let mut dk = dkv.slice_mut(s![.., ..d]).to_owned();
                self.rotate(&mut dk, 0, true);
                dkv.slice_mut(s![.., ..d]).assign(&dk);
            }
            let qx = lc.qx.as_ref().unwrap_or(&lc.x);
            let gw = &mut g.layers[t];
            gw.wq = qx.t().dot(&dq);
            let dwkv = lc.x.t().dot(&dkv);
            gw.wk = dwkv.slice(s![.., ..d]).to_owned();
            gw.wv = dwkv.slice(s![.., d..]).to_owned();
            if t == 0 {
                break;
            }
            let mut next = dkv.dot(&concatenate![Axis(1), w.wk, w.wv].t());
            let mut dqx = dq.dot(&w.wq.t());
            if self.cfg.residual {
                dqx += &gu;
            }
            if r0 == 0 {
                next += &dqx;
            } else {
                self.scatter_add_rows(&mut next, &dqx, r0);
            }
            dx = next;
        }
        g
    }

    /// Per-sample attention maps of every layer as `f64` maps. Needs a
    /// [`Rows::All`] forward pass.
    pub fn attention_maps(&self, cache: &Cache<F>, sample: usize) -> Result<Vec<AttentionMap>> {
        if cache.layers.iter().any(|l| l.r0 != 0) {
            return Err(Error::Shape("attention maps need a full forward pass".into()));
        }
        Ok(cache
            .layers
            .iter()
            .map(|l| AttentionMap(l.maps.index_axis(Axis(0), sample).mapv(|v| v.to_f64().expect("real"))))
            .collect())
    }
}

// Small per-sample products. Rows are contiguous in every caller; the
// inner loops run over `d` with independent accumulators so they vectorise.

fn row<F>(m: ArrayView2<'_, F>, i: usize) -> &'_ [F] {
    m.index_axis_move(Axis(0), i).to_slice().expect("contiguous row")
}

fn dot<F: Real>(x: &[F], y: &[F]) -> F {
    let mut acc = [F::zero(); 8];
    let (xc, yc) = (x.chunks_exact(8), y.chunks_exact(8));
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for l in 0..8 {
            acc[l] += a[l] * b[l];
        }
    }
    let mut total = acc.iter().fold(F::zero(), |s, &v| s + v);
    for (a, b) in xr.iter().zip(yr) {
        total += *a * *b;
    }
    total
}

fn axpy<F: Real>(alpha: F, x: &[F], y: &mut [F]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// `out = a bᵀ`.
fn abt<F: Real>(a: ArrayView2<F>, b: ArrayView2<F>, mut out: ArrayViewMut2<F>) {
    for i in 0..a.nrows() {
        let ai = row(a, i);
        for j in 0..b.nrows() {
            out[[i, j]] = dot(ai, row(b, j));
        }
    }
}

/// `out = a b`, skipping zero entries of `a` (masked attention weights).
fn ab<F: Real>(a: ArrayView2<F>, b: ArrayView2<F>, mut out: ArrayViewMut2<F>) {
    out.fill(F::zero());
    for i in 0..a.nrows() {
        let mut oi = out.row_mut(i);
        let oi = oi.as_slice_mut().expect("contiguous row");
        for j in 0..a.ncols() {
            let w = a[[i, j]];
            if w != F::zero() {
                axpy(w, row(b, j), oi);
            }
        }
    }
}

/// `out = aᵀ b`, skipping zero entries of `a`.
fn atb<F: Real>(a: ArrayView2<F>, b: ArrayView2<F>, mut out: ArrayViewMut2<F>) {
    out.fill(F::zero());
    for i in 0..a.nrows() {
        let bi = row(b, i);
        for j in 0..a.ncols() {
            let w = a[[i, j]];
            if w != F::zero() {
                let mut oj = out.row_mut(j);
                axpy(w, bi, oj.as_slice_mut().expect("contiguous row"));
            }
        }
    }
}

fn relu<F: Real>(v: F) -> F {
    if v > F::zero() {
        v
    } else {
        F::zero()
    }
}

fn relu_mask<F: Real>(g: &mut Array2<F>, pre: &Array2<F>) {
    g.zip_mut_with(pre, |gv, &a| {
        if a <= F::zero() {
            *gv = F::zero();
        }
    });
}

/// In place: `dZ = A ⊙ (dA - rowsum(dA ⊙ A))`. Masked entries have `A = 0`.
fn softmax_backward<F: Real>(a: ArrayView2<F>, da: &mut Array2<F>) {
    for (arow, mut drow) in a.rows().into_iter().zip(da.rows_mut()) {
        let dot: F = arow.iter().zip(drow.iter()).map(|(&x, &y)| x * y).sum();
        drow.zip_mut_with(&arow, |dv, &av| *dv = av * (*dv - dot));
    }
}

/// Mean cross-entropy of integer targets and `∂loss/∂logits`.
pub fn cross_entropy<F: Real>(logits: ArrayView2<F>, targets: &[usize]) -> Result<(F, Array2<F>)> {
    let (batch, l) = logits.dim();
    if targets.len() != batch {
        return Err(Error::Shape(format!("{} targets for a batch of {batch}", targets.len())));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= l) {
        return Err(Error::Shape(format!("target {t} outside 0..{l}")));
    }
    let inv = F::one() / cast(batch as f64);
    let mut grad = Array2::zeros((batch, l));
    let mut loss = F::zero();
    for (b, (row, &t)) in logits.rows().into_iter().zip(targets).enumerate() {
        let mx = row.fold(F::neg_infinity(), |m, &v| m.max(v));
        let total: F = row.iter().map(|&v| (v - mx).exp()).sum();
        let lse = mx + total.ln();
        loss += lse - row[t];
        for (j, &v) in row.iter().enumerate() {
            grad[[b, j]] = (v - lse).exp() * inv;
        }
        grad[[b, t]] -= inv;
    }
    Ok((loss * inv, grad))
}

/// Index of the largest logit, ties to the lowest index.
pub fn argmax<F: Real>(row: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Stacks sample token matrices into a `(B, N, d)` batch.
pub fn stack_tokens<F: Real>(mats: &[&Array2<f64>]) -> Result<Array3<F>> {
    let first = mats.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
    let (n, d) = first.dim();
    if mats.iter().any(|m| m.dim() != (n, d)) {
        return Err(Error::Shape("samples differ in shape".into()));
    }
    let mut out = Array3::zeros((mats.len(), n, d));
    for (b, m) in mats.iter().enumerate() {
        out.index_axis_mut(Axis(0), b).assign(&m.mapv(cast::<F>));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_l() {
        let z = Array2::<f64>::zeros((3, 32));
        let (loss, g) = cross_entropy(z.view(), &[0, 5, 31]).unwrap();
        assert!((loss - 32f64.ln()).abs() < 1e-15);
        assert!(g.sum().abs() < 1e-15);
        assert!(cross_entropy(z.view(), &[32, 0, 0]).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0f32]), 0);
    }

    #[test]
    fn init_is_deterministic_and_scaled() {
        let cfg = ModelConfig::default();
        let a = Params::<f64>::init(&cfg, 3);
        assert_eq!(a, Params::init(&cfg, 3));
        assert_ne!(a, Params::init(&cfg, 4));
        let var = a.layers[0].wq.mapv(|v| v * v).mean().unwrap();
        assert!((var * 64.0 - 1.0).abs() < 0.1, "{var}");
        assert!(a.b1.iter().all(|&v| v == 0.0));
        assert_eq!(a.tensors().len(), a.tensor_names().len());
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let cfg = ModelConfig { dim: 4, hidden: 4, l_labels: 3, ..ModelConfig::default() };
        let net = Network::<f64>::new(&cfg, 5).unwrap();
        let p = Params::init(&cfg, 0);
        assert!(net.forward(&p, &Array3::zeros((2, 6, 4)), Rows::All).is_err());
        let other = Params::init(&ModelConfig { depth: 3, ..cfg.clone() }, 0);
        assert!(net.forward(&other, &Array3::zeros((2, 5, 4)), Rows::All).is_err());
        assert!(Network::<f64>::new(&ModelConfig { mask: MaskKind::SlidingWindow { width: 9 }, ..cfg }, 5).is_err());
    }
}
