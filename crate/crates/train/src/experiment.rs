//! Multi-seed sweeps: datagen, training, gap evaluation and sink analysis per
//! run, then mean and standard error per grid cell.
//!
//! Layout under the output directory:
//!
//! ```text
//! <runs>/<cell>/seed-<s>/{spec.json, train_log.csv, params.bin, params.json,
//!                       eval.json, eval.csv, sinks.json, result.json}
//! runs.csv  gaps.csv  positions.csv  sinks.csv  failures.json
//! ```
//!
//! `<runs>` defaults to `runs/` under the output directory; sweeps that share
//! it share runs. A run whose `result.json` already holds the same resolved
//! spec is reused when resuming.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use posbias_core::export::SCHEMA_VERSION;
use posbias_core::theory::sinks::DEFAULT_SINK_TAU;
use posbias_core::{MaskKind, PeMode};

use crate::checkpoint::{manifest_for, save_checkpoint};
use crate::data::{build_class_bank, BiasMode, DataConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate_gaps, sink_scores, standard_pairs, EvalReport, Trained};
use crate::model::{ModelConfig, Network, Real};
use crate::trainer::{train, write_log_csv, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Sequences per test list.
    pub pairs: usize,
    /// Sequences per position in the single-occurrence curve; 0 skips it.
    pub probes: usize,
    /// Unbiased sequences for the sink scores; 0 skips them.
    pub sinks: usize,
    pub tau: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { pairs: 10_000, probes: 1_000, sinks: 10_000, tau: DEFAULT_SINK_TAU }
    }
}

/// Axes of the sweep; the run grid is their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub masks: Vec<MaskKind>,
    pub pes: Vec<PeMode>,
    pub depths: Vec<usize>,
    pub residual: Vec<bool>,
    pub biases: Vec<BiasMode>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            masks: vec![MaskKind::Causal],
            pes: vec![PeMode::NoPe],
            depths: vec![2],
            residual: vec![false],
            biases: vec![BiasMode::Uniform],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub precision: Precision,
    pub grid: GridConfig,
    /// Base settings; grid axes and the seed override the matching fields.
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seeds: (0..5).collect(),
            precision: Precision::F32,
            grid: GridConfig::default(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mask: MaskKind,
    pub pe: PeMode,
    pub depth: usize,
    pub residual: bool,
    pub bias: BiasMode,
}

impl Cell {
    /// Filesystem-safe identifier.
    pub fn id(&self) -> String {
        let raw = format!(
            "{}_{}_d{}_{}_{}",
            self.mask,
            self.pe,
            self.depth,
            if self.residual { "res" } else { "nores" },
            self.bias
        );
        raw.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '-' }).collect()
    }

    fn csv_prefix(&self) -> String {
        format!("{},{},{},{},{}", self.mask, self.pe, self.depth, self.residual, self.bias)
    }
}

const CELL_HEADER: &str = "mask,pe,depth,residual,bias";

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub schema: u32,
    pub cell: Cell,
    pub seed: u64,
    pub precision: Precision,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub spec: RunSpec,
    pub final_loss: f64,
    pub train_wall_s: f64,
    pub eval: EvalReport,
    /// Mean sink score per token, 0-based.
    pub sink_scores: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if self.seeds.is_empty() {
            return Err(Error::ModelConfig("seeds must not be empty".into()));
        }
        if g.masks.is_empty() || g.pes.is_empty() || g.depths.is_empty() || g.residual.is_empty() || g.biases.is_empty() {
            return Err(Error::ModelConfig("every grid axis needs at least one value".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !self.seeds.iter().all(|s| seen.insert(*s)) {
            return Err(Error::ModelConfig("seeds must be distinct".into()));
        }
        if !(self.eval.tau > 0.0 && self.eval.tau <= 1.0) || self.eval.pairs == 0 {
            return Err(Error::ModelConfig("eval.pairs must be positive and eval.tau in (0, 1]".into()));
        }
        self.train.validate()?;
        for spec in self.runs() {
            spec.data.validate()?;
            spec.model.validate(spec.data.tokens())?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let mut out = Vec::new();
        for mask in &g.masks {
            for pe in &g.pes {
                for &depth in &g.depths {
                    for &residual in &g.residual {
                        for bias in &g.biases {
                            out.push(Cell { mask: *mask, pe: pe.clone(), depth, residual, bias: bias.clone() });
                        }
                    }
                }
            }
        }
        out
    }

    /// Cells in grid order, seeds in listed order within each cell.
    pub fn runs(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for cell in self.cells() {
            for &seed in &self.seeds {
                let data = DataConfig { bias: cell.bias.clone(), seed, ..self.data.clone() };
                let model = ModelConfig {
                    mask: cell.mask,
                    pe: cell.pe.clone(),
                    depth: cell.depth,
                    residual: cell.residual,
                    dim: data.dim,
                    l_labels: data.l_labels,
                    ..self.model.clone()
                };
                out.push(RunSpec {
                    schema: SCHEMA_VERSION,
                    cell: cell.clone(),
                    seed,
                    precision: self.precision,
                    data,
                    model,
                    train: TrainConfig { init_seed: seed, ..self.train.clone() },
                    eval: self.eval.clone(),
                });
            }
        }
        out
    }
}

pub fn run_dir(runs: &Path, spec: &RunSpec) -> PathBuf {
    runs.join(spec.cell.id()).join(format!("seed-{}", spec.seed))
}

fn cached(dir: &Path, spec: &RunSpec) -> Option<RunResult> {
    let text = fs::read_to_string(dir.join("result.json")).ok()?;
    let res: RunResult = serde_json::from_str(&text).ok()?;
    (res.spec == *spec).then_some(res)
}

/// Trains, evaluates and writes every artifact of one run into `dir`.
pub fn run_one(spec: &RunSpec, dir: &Path, resume: bool, log: &(dyn Fn(&str) + Sync)) -> Result<RunResult> {
    if resume {
        if let Some(res) = cached(dir, spec) {
            log(&format!("{} seed {}: reusing result", spec.cell.id(), spec.seed));
            return Ok(res);
        }
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join("spec.json"), serde_json::to_string_pretty(spec)?)?;
    match spec.precision {
        Precision::F32 => run_typed::<f32>(spec, dir, log),
        Precision::F64 => run_typed::<f64>(spec, dir, log),
    }
}

fn run_typed<F: Real>(spec: &RunSpec, dir: &Path, log: &(dyn Fn(&str) + Sync)) -> Result<RunResult> {
    let bank = build_class_bank(&spec.data)?;
    let tag = format!("{} seed {}", spec.cell.id(), spec.seed);
    let every = (spec.train.iterations / 10).max(1);
    let outcome = train::<F>(&spec.model, &spec.data, &bank, &spec.train, |row| {
        if row.iteration % every == 0 {
            log(&format!("{tag}: iteration {} loss {:.4} ({:.0}s)", row.iteration, row.loss, row.wall_s));
        }
    })?;
    write_log_csv(&outcome.log, fs::File::create(dir.join("train_log.csv"))?)?;
    let manifest = manifest_for(&outcome.params, &spec.model, &spec.data, &spec.train, spec.train.iterations);
    save_checkpoint(&outcome.params, &manifest, &dir.join("params.bin"), &dir.join("params.json"))?;

    let net = Network::<F>::new(&spec.model, spec.data.tokens())?;
    let pred = Trained { net: &net, params: &outcome.params };
    let report = evaluate_gaps(&pred, &bank, &spec.data, &standard_pairs(&spec.data), spec.eval.pairs, spec.eval.probes, spec.seed)?;
    fs::write(dir.join("eval.json"), serde_json::to_string_pretty(&report)?)?;
    report.write_csv(fs::File::create(dir.join("eval.csv"))?)?;

    let sinks = if spec.eval.sinks > 0 {
        let rep = sink_scores(&net, &outcome.params, &bank, &spec.data, spec.eval.sinks, spec.eval.tau)?;
        fs::write(dir.join("sinks.json"), serde_json::to_string_pretty(&rep)?)?;
        Some(rep.scores)
    } else {
        None
    };
    let res = RunResult {
        spec: spec.clone(),
        final_loss: outcome.log.last().map_or(f64::NAN, |r| r.loss),
        train_wall_s: outcome.log.last().map_or(0.0, |r| r.wall_s),
        eval: report,
        sink_scores: sinks,
    };
    fs::write(dir.join("result.json"), serde_json::to_string_pretty(&res)?)?;
    let fl = res.eval.pair("first-last").map_or(f64::NAN, |p| p.gap);
    log(&format!("{tag}: done, loss {:.4}, first-last gap {fl:+.4}", res.final_loss));
    Ok(res)
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub cell: String,
    pub seed: u64,
    pub error: String,
}

pub struct ExperimentOutcome {
    /// In `ExperimentConfig::runs` order.
    pub runs: Vec<(RunSpec, std::result::Result<RunResult, String>)>,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> Vec<Failure> {
        self.runs
            .iter()
            .filter_map(|(s, r)| r.as_ref().err().map(|e| Failure { cell: s.cell.id(), seed: s.seed, error: e.clone() }))
            .collect()
    }

    /// Successful results of `cell`, in seed order.
    pub fn results_for(&self, cell: &Cell) -> Vec<&RunResult> {
        self.runs.iter().filter(|(s, _)| s.cell == *cell).filter_map(|(_, r)| r.as_ref().ok()).collect()
    }
}

/// Runs every grid cell and seed with up to `jobs` concurrent runs, then
/// writes the aggregate tables. Per-run failures are collected, not raised.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out: &Path,
    runs: &Path,
    jobs: usize,
    resume: bool,
    log: &(dyn Fn(&str) + Sync),
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let specs = cfg.runs();
    let slots: Mutex<Vec<Option<std::result::Result<RunResult, String>>>> = Mutex::new(vec![None; specs.len()]);
    let next = AtomicUsize::new(0);
    let started = Instant::now();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, specs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(spec) = specs.get(i) else { break };
                let res = run_one(spec, &run_dir(runs, spec), resume, log).map_err(|e| e.to_string());
                if let Err(e) = &res {
                    log(&format!("{} seed {}: FAILED: {e}", spec.cell.id(), spec.seed));
                }
                slots.lock().expect("no panics while holding the lock")[i] = Some(res);
            });
        }
    });
    let results = slots.into_inner().expect("workers joined");
    let outcome = ExperimentOutcome {
        runs: specs.into_iter().zip(results).map(|(s, r)| (s, r.expect("every job ran"))).collect(),
    };
    write_aggregates(cfg, &outcome, out)?;
    log(&format!("{}: {} runs in {:.0}s", cfg.name, outcome.runs.len(), started.elapsed().as_secs_f64()));
    Ok(outcome)
}

/// Mean and standard error (`sd / √n`, sample sd); the error is NaN for n < 2.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn write_aggregates(cfg: &ExperimentConfig, outcome: &ExperimentOutcome, out: &Path) -> Result<()> {
    let mut runs = fs::File::create(out.join("runs.csv"))?;
    writeln!(runs, "{CELL_HEADER},seed,status,final_loss,first_middle,first_last,middle_last")?;
    for (spec, res) in &outcome.runs {
        match res {
            Ok(r) => {
                let g = |n: &str| r.eval.pair(n).map_or(f64::NAN, |p| p.gap);
                writeln!(
                    runs,
                    "{},{},ok,{:.6},{:.6},{:.6},{:.6}",
                    spec.cell.csv_prefix(),
                    spec.seed,
                    r.final_loss,
                    g("first-middle"),
                    g("first-last"),
                    g("middle-last")
                )?;
            }
            Err(_) => writeln!(runs, "{},{},failed,,,,", spec.cell.csv_prefix(), spec.seed)?,
        }
    }

    let mut gaps = fs::File::create(out.join("gaps.csv"))?;
    writeln!(gaps, "{CELL_HEADER},pair,n,mean_gap,se_gap,mean_acc_ab,mean_acc_ba")?;
    let mut pos = fs::File::create(out.join("positions.csv"))?;
    writeln!(pos, "{CELL_HEADER},position,n,mean_acc,se_acc")?;
    let mut sinks = fs::File::create(out.join("sinks.csv"))?;
    writeln!(sinks, "{CELL_HEADER},token,n,mean_score,se_score")?;
    for cell in cfg.cells() {
        let rs = outcome.results_for(&cell);
        if rs.is_empty() {
            continue;
        }
        let prefix = cell.csv_prefix();
        for (k, p) in rs[0].eval.pairs.iter().enumerate() {
            let col = |f: fn(&crate::eval::PairResult) -> f64| mean_se(&rs.iter().map(|r| f(&r.eval.pairs[k])).collect::<Vec<_>>());
            let (g, se) = col(|p| p.gap);
            writeln!(gaps, "{prefix},{},{},{g:.6},{se:.6},{:.6},{:.6}", p.name, rs.len(), col(|p| p.acc_ab).0, col(|p| p.acc_ba).0)?;
        }
        for i in 0..rs[0].eval.position_curve.len() {
            let (m, se) = mean_se(&rs.iter().map(|r| r.eval.position_curve[i]).collect::<Vec<_>>());
            writeln!(pos, "{prefix},{},{},{m:.6},{se:.6}", i + 1, rs.len())?;
        }
        let with_sinks: Vec<&Vec<f64>> = rs.iter().filter_map(|r| r.sink_scores.as_ref()).collect();
        if let Some(first) = with_sinks.first() {
            for j in 0..first.len() {
                let (m, se) = mean_se(&with_sinks.iter().map(|s| s[j]).collect::<Vec<_>>());
                writeln!(sinks, "{prefix},{},{},{m:.6},{se:.6}", j + 1, with_sinks.len())?;
            }
        }
    }
    fs::write(out.join("failures.json"), serde_json::to_string_pretty(&outcome.failures())?)?;
    Ok(())
}
