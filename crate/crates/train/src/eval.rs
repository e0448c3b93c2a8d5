//! Retrieval accuracy on novel classes, position-bias gaps and sink scores.

use std::io::Write;

use serde::{Deserialize, Serialize};

use posbias_core::export::SCHEMA_VERSION;
use posbias_core::theory::{attention_sink_metric, SinkReport};

use crate::data::{build_novel_test_pairs, build_position_probes, gap_statistic, sequence_at, ClassBank, DataConfig, SequenceSample, TestPairSpec};
use crate::error::{Error, Result};
use crate::model::{argmax, stack_tokens, Network, Params, Real, Rows};

/// Anything that maps sequences to predicted labels.
pub trait Predictor {
    fn predict(&self, samples: &[SequenceSample]) -> Result<Vec<usize>>;
}

const CHUNK: usize = 512;

pub struct Trained<'a, F> {
    pub net: &'a Network<F>,
    pub params: &'a Params<F>,
}

impl<F: Real> Predictor for Trained<'_, F> {
    fn predict(&self, samples: &[SequenceSample]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(CHUNK) {
            let mats: Vec<_> = chunk.iter().map(|s| &s.tokens).collect();
            let logits = self.net.logits(self.params, &stack_tokens::<F>(&mats)?)?;
            out.extend(logits.rows().into_iter().map(|r| argmax(r.as_slice().expect("contiguous logits"))));
        }
        Ok(out)
    }
}

impl<P: Fn(&SequenceSample) -> usize> Predictor for P {
    fn predict(&self, samples: &[SequenceSample]) -> Result<Vec<usize>> {
        Ok(samples.iter().map(self).collect())
    }
}

pub fn accuracy(pred: &impl Predictor, samples: &[SequenceSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Shape("accuracy of an empty set".into()));
    }
    let hits = pred.predict(samples)?.iter().zip(samples).filter(|(p, s)| **p == s.target_label).count();
    Ok(hits as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    /// e.g. `first-last`.
    pub name: String,
    pub pos_a: usize,
    pub pos_b: usize,
    /// Accuracy with the target label at `a`.
    pub acc_ab: f64,
    pub acc_ba: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub seed: u64,
    pub count: usize,
    pub pairs: Vec<PairResult>,
    /// Accuracy with the only item of the query's class at position `p`,
    /// indexed by `p - 1`.
    pub position_curve: Vec<f64>,
}

impl EvalReport {
    pub fn pair(&self, name: &str) -> Option<&PairResult> {
        self.pairs.iter().find(|p| p.name == name)
    }

    /// `set,accuracy,gap` rows: one per test list plus one per gap.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "test_set,accuracy,gap")?;
        for p in &self.pairs {
            writeln!(w, "[{}*;{}],{:.6},", p.pos_a, p.pos_b, p.acc_ab)?;
            writeln!(w, "[{}*;{}],{:.6},", p.pos_b, p.pos_a, p.acc_ba)?;
            writeln!(w, "{},,{:.6}", p.name, p.gap)?;
        }
        for (i, a) in self.position_curve.iter().enumerate() {
            writeln!(w, "position-{},{a:.6},", i + 1)?;
        }
        Ok(())
    }
}

/// `first-middle`, `first-last`, `middle-last` with first = 1, middle = n/2, last = n.
pub fn standard_pairs(cfg: &DataConfig) -> Vec<(String, TestPairSpec)> {
    let (first, middle, last) = (1, cfg.middle(), cfg.n_items);
    vec![
        ("first-middle".into(), TestPairSpec::new(first, middle)),
        ("first-last".into(), TestPairSpec::new(first, last)),
        ("middle-last".into(), TestPairSpec::new(middle, last)),
    ]
}

pub fn evaluate_gaps(
    pred: &impl Predictor,
    bank: &ClassBank,
    cfg: &DataConfig,
    pairs: &[(String, TestPairSpec)],
    count: usize,
    probe_count: usize,
    seed: u64,
) -> Result<EvalReport> {
    let mut out = Vec::with_capacity(pairs.len());
    for (name, spec) in pairs {
        let (ab, ba) = build_novel_test_pairs(bank, cfg, *spec, count, seed)?;
        let (acc_ab, acc_ba) = (accuracy(pred, &ab)?, accuracy(pred, &ba)?);
        out.push(PairResult {
            name: name.clone(),
            pos_a: spec.pos_a,
            pos_b: spec.pos_b,
            acc_ab,
            acc_ba,
            gap: gap_statistic(acc_ab, acc_ba),
        });
    }
    let position_curve = if probe_count == 0 {
        Vec::new()
    } else {
        build_position_probes(bank, cfg, probe_count, seed)?.iter().map(|set| accuracy(pred, set)).collect::<Result<_>>()?
    };
    Ok(EvalReport { schema: SCHEMA_VERSION, seed, count, pairs: out, position_curve })
}

/// Mean sink scores over `count` unbiased sequences drawn from the training
/// bank on a stream separate from training.
pub fn sink_scores<F: Real>(
    net: &Network<F>,
    params: &Params<F>,
    bank: &ClassBank,
    cfg: &DataConfig,
    count: usize,
    tau: f64,
) -> Result<SinkReport> {
    if count == 0 {
        return Err(Error::Shape("sink analysis needs at least one sequence".into()));
    }
    let unbiased = DataConfig { bias: crate::data::BiasMode::Uniform, ..cfg.clone() };
    let mut sum: Option<SinkReport> = None;
    for start in (0..count).step_by(CHUNK) {
        let samples = (start..count.min(start + CHUNK))
            .map(|i| sequence_at(bank, &unbiased, "sink", i as u64))
            .collect::<Result<Vec<_>>>()?;
        let mats: Vec<_> = samples.iter().map(|s| &s.tokens).collect();
        let cache = net.forward(params, &stack_tokens::<F>(&mats)?, Rows::All)?;
        for b in 0..samples.len() {
            let rep = attention_sink_metric(&net.attention_maps(&cache, b)?, &net.graph, tau)?;
            match &mut sum {
                None => sum = Some(rep),
                Some(acc) => acc.scores.iter_mut().zip(&rep.scores).for_each(|(a, s)| *a += s),
            }
        }
    }
    let mut rep = sum.expect("count > 0");
    rep.scores.iter_mut().for_each(|s| *s /= count as f64);
    Ok(rep)
}
