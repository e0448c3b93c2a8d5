//! Training loop over the infinite sequence stream.

use std::io::Write;
use std::time::Instant;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::data::{train_sequence_at, ClassBank, DataConfig, SequenceSample};
use crate::error::{Error, Result};
use crate::model::{stack_tokens, ModelConfig, Network, Params, Real};
use crate::optim::{AdamWConfig, OptState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch: usize,
    pub log_every: usize,
    /// Seed for parameter initialisation; data has its own seed.
    pub init_seed: u64,
    pub optimizer: AdamWConfig,
}

impl Default for TrainConfig {
    /// Desk scale: 20k iterations of batch 128.
    fn default() -> Self {
        TrainConfig { iterations: 20_000, batch: 128, log_every: 100, init_seed: 0, optimizer: AdamWConfig::default() }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.log_every == 0 {
            return Err(Error::ModelConfig("batch and log_every must be positive".into()));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0) || !(o.weight_decay >= 0.0) || !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) {
            return Err(Error::ModelConfig(format!("invalid optimizer settings {o:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub iteration: usize,
    pub loss: f64,
    pub wall_s: f64,
}

pub struct TrainOutcome<F> {
    pub params: Params<F>,
    pub log: Vec<LogRow>,
}

pub fn write_log_csv<W: Write>(log: &[LogRow], mut w: W) -> Result<()> {
    writeln!(w, "iteration,loss,wall_s")?;
    for r in log {
        writeln!(w, "{},{:.6},{:.3}", r.iteration, r.loss, r.wall_s)?;
    }
    Ok(())
}

/// Tokens and targets of a batch.
pub fn batch_arrays<F: Real>(samples: &[SequenceSample]) -> Result<(Array3<F>, Vec<usize>)> {
    let mats: Vec<_> = samples.iter().map(|s| &s.tokens).collect();
    Ok((stack_tokens(&mats)?, samples.iter().map(|s| s.target_label).collect()))
}

/// Iteration `it` uses stream indices `it·batch .. (it+1)·batch`.
pub fn train_batch(bank: &ClassBank, data: &DataConfig, it: usize, batch: usize) -> Result<Vec<SequenceSample>> {
    let start = (it * batch) as u64;
    (start..start + batch as u64).map(|i| train_sequence_at(bank, data, i)).collect()
}

/// Runs `cfg.iterations` AdamW steps. The logged loss of an interval is the
/// mean batch loss over that interval.
pub fn train<F: Real>(
    model: &ModelConfig,
    data: &DataConfig,
    bank: &ClassBank,
    cfg: &TrainConfig,
    mut on_log: impl FnMut(&LogRow),
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    data.validate()?;
    if model.dim != data.dim || model.l_labels != data.l_labels {
        return Err(Error::ModelConfig(format!(
            "model (d={}, L={}) does not match data (d={}, L={})",
            model.dim, model.l_labels, data.dim, data.l_labels
        )));
    }
    let net = Network::<F>::new(model, data.tokens())?;
    let mut params = Params::<F>::init(model, cfg.init_seed);
    let mut opt = OptState::new(cfg.optimizer, &params);
    let started = Instant::now();
    let mut log = Vec::new();
    let mut acc = 0.0;
    let mut seen = 0;
    for it in 0..cfg.iterations {
        let samples = train_batch(bank, data, it, cfg.batch)?;
        let (tokens, targets) = batch_arrays::<F>(&samples)?;
        let (loss, grads) = match net.loss_and_grads(&params, &tokens, &targets) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => return Err(Error::Diverged { iteration: it }),
            Err(e) => return Err(e),
        };
        let loss = loss.to_f64().unwrap_or(f64::NAN);
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: it });
        }
        opt.step(&mut params, &grads)?;
        acc += loss;
        seen += 1;
        if (it + 1) % cfg.log_every == 0 || it + 1 == cfg.iterations {
            let row = LogRow { iteration: it + 1, loss: acc / seen as f64, wall_s: started.elapsed().as_secs_f64() };
            on_log(&row);
            log.push(row);
            acc = 0.0;
            seen = 0;
        }
    }
    if !params.all_finite() {
        return Err(Error::Diverged { iteration: cfg.iterations });
    }
    Ok(TrainOutcome { params, log })
}
