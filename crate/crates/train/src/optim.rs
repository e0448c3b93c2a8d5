//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cast, Params, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { lr: 1e-3, weight_decay: 1e-6, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct OptState<F> {
    pub cfg: AdamWConfig,
    pub step: u64,
    pub m: Vec<Vec<F>>,
    pub v: Vec<Vec<F>>,
}

impl<F: Real> OptState<F> {
    pub fn new(cfg: AdamWConfig, params: &Params<F>) -> Self {
        let zeros: Vec<Vec<F>> = params.tensors().iter().map(|t| vec![F::zero(); t.len()]).collect();
        OptState { cfg, step: 0, m: zeros.clone(), v: zeros }
    }

    /// One update:
    ///
    /// ```text
    /// m ← β₁m + (1-β₁)g        v ← β₂v + (1-β₂)g²
    /// θ ← θ - lr·m̂/(√v̂ + eps) - lr·wd·θ
    /// ```
    pub fn step(&mut self, params: &mut Params<F>, grads: &Params<F>) -> Result<()> {
        let gs = grads.tensors();
        let mut ps = params.tensors_mut();
        if ps.len() != self.m.len() || ps.iter().zip(&gs).zip(&self.m).any(|((p, g), m)| p.len() != g.len() || p.len() != m.len()) {
            return Err(Error::Shape("optimizer state does not match the parameters".into()));
        }
        self.step += 1;
        let c = self.cfg;
        let (b1, b2): (F, F) = (cast(c.beta1), cast(c.beta2));
        let c1: F = cast(1.0 - c.beta1.powi(self.step as i32));
        let c2: F = cast(1.0 - c.beta2.powi(self.step as i32));
        let (lr, decay, eps): (F, F, F) = (cast(c.lr), cast(c.lr * c.weight_decay), cast(c.eps));
        let one = F::one();
        for (((p, g), m), v) in ps.iter_mut().zip(&gs).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps) - decay * p[i];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn scalar_params(v: f64) -> Params<f64> {
        let cfg = ModelConfig { depth: 1, dim: 1, hidden: 1, l_labels: 1, ..ModelConfig::default() };
        let mut p = Params::zeros(&cfg);
        p.tensors_mut().into_iter().for_each(|t| t[0] = v);
        p
    }

    #[test]
    fn first_step_by_hand() {
        let mut p = scalar_params(1.0);
        let g = scalar_params(1.0);
        let mut opt = OptState::new(AdamWConfig { lr: 0.1, weight_decay: 0.0, ..AdamWConfig::default() }, &p);
        opt.step(&mut p, &g).unwrap();
        assert!((opt.m[0][0] - 0.1).abs() < 1e-15);
        assert!((opt.v[0][0] - 1e-3).abs() < 1e-15);
        let want = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!(p.tensors().iter().all(|t| (t[0] - want).abs() < 1e-15));
    }

    #[test]
    fn zero_gradient_only_decays() {
        let mut p = scalar_params(2.0);
        let g = scalar_params(0.0);
        let cfg = AdamWConfig { lr: 0.01, weight_decay: 0.5, ..AdamWConfig::default() };
        let mut opt = OptState::new(cfg, &p);
        for k in 1..=3 {
            opt.step(&mut p, &g).unwrap();
            let want = 2.0 * (1.0f64 - 0.005).powi(k);
            assert!((p.w1[[0, 0]] - want).abs() < 1e-15, "step {k}");
        }
    }
}
