//! Analytic gradients against central finite differences.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{ModelConfig, Network, Params, Rows};

pub const STEP: f64 = 1e-5;
/// Denominator floor for entries whose gradient is essentially zero.
pub const FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GradCheck {
    /// `|a - n| / max(|a|, |n|, FLOOR)`, worst entry.
    pub max_rel_error: f64,
    pub worst: String,
    pub entries: usize,
}

/// Checks every parameter entry on a random batch of `batch` sequences of
/// `tokens` rows, with random inputs, targets and classifier biases.
pub fn check_gradients(cfg: &ModelConfig, tokens: usize, batch: usize, seed: u64, rows: Rows) -> Result<GradCheck> {
    let net = Network::<f64>::new(cfg, tokens)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Params::<f64>::init(cfg, seed);
    // Non-zero biases so every classifier path is exercised.
    for b in [&mut params.b1, &mut params.b2, &mut params.b3] {
        b.mapv_inplace(|_| rng.random_range(-0.3..0.3));
    }
    let x = Array3::from_shape_fn((batch, tokens, cfg.dim), |_| rng.random_range(-1.0..1.0));
    let targets: Vec<usize> = (0..batch).map(|_| rng.random_range(0..cfg.l_labels)).collect();
    let (_, grads) = net.loss_and_grads_with(&params, &x, &targets, rows)?;

    let names = params.tensor_names();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut out = GradCheck { max_rel_error: 0.0, worst: String::new(), entries: 0 };
    for (ti, name) in names.iter().enumerate() {
        for e in 0..analytic[ti].len() {
            let loss_at = |delta: f64| -> Result<f64> {
                let mut p = params.clone();
                p.tensors_mut()[ti][e] += delta;
                Ok(net.loss_and_grads_with(&p, &x, &targets, rows)?.0)
            };
            let numeric = (loss_at(STEP)? - loss_at(-STEP)?) / (2.0 * STEP);
            let a = analytic[ti][e];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            out.entries += 1;
            if rel > out.max_rel_error {
                out.max_rel_error = rel;
                out.worst = format!("{name}[{e}] analytic {a:e} numeric {numeric:e}");
            }
        }
    }
    Ok(out)
}
