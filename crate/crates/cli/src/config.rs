//! Per-subcommand TOML configs. Unknown keys are rejected; absent keys take
//! the defaults below.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use posbias_core::theory::suites::VerifySettings;
use posbias_core::theory::DEFAULT_SINK_TAU;
use posbias_core::{MaskKind, PeMode};
use posbias_train::data::DataConfig;
use posbias_train::experiment::{EvalConfig, Precision};
use posbias_train::model::ModelConfig;
use posbias_train::trainer::TrainConfig;

use crate::CliError;

/// Name of the resolved-config echo inside the output directory.
pub const RESOLVED: &str = "resolved.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutConfig {
    pub masks: Vec<MaskKind>,
    pub pes: Vec<PeMode>,
    pub n: usize,
    pub d: usize,
    pub depth: usize,
    /// Random stacks per mask and encoding.
    pub seeds: u64,
    pub seed: u64,
    /// Spectral norm of `W_Q` and `W_K`.
    pub c_bound: f64,
    pub temperature: f64,
    /// Center-mass tolerance of the convergence report.
    pub tol: f64,
    /// Also write each cumulative matrix as a binary blob.
    pub blobs: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            masks: vec![MaskKind::Causal],
            pes: vec![PeMode::NoPe],
            n: 16,
            d: 8,
            depth: 64,
            seeds: 5,
            seed: 0,
            c_bound: 1.0,
            temperature: 1.0,
            tol: 0.01,
            blobs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Empty runs every suite.
    pub suites: Vec<String>,
    pub settings: VerifySettings,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { suites: Vec::new(), settings: VerifySettings::default() }
    }
}

/// Sink scores of a trained checkpoint, or of random stacks when no
/// checkpoint is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinksConfig {
    pub checkpoint: Option<PathBuf>,
    pub precision: Precision,
    /// Unbiased sequences scored for a checkpoint.
    pub count: usize,
    pub tau: f64,
    pub masks: Vec<MaskKind>,
    pub pe: PeMode,
    pub n: usize,
    pub d: usize,
    pub depth: usize,
    pub seeds: u64,
    pub seed: u64,
    pub c_bound: f64,
}

impl Default for SinksConfig {
    fn default() -> Self {
        SinksConfig {
            checkpoint: None,
            precision: Precision::F32,
            count: 10_000,
            tau: DEFAULT_SINK_TAU,
            masks: vec![MaskKind::Causal],
            pe: PeMode::NoPe,
            n: 17,
            d: 64,
            depth: 2,
            seeds: 5,
            seed: 0,
            c_bound: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSet {
    /// Training stream, indices `start..start + count`.
    Train,
    /// Novel-class test lists `[a*;b]` and `[b*;a]`.
    Pairs,
    /// Single-occurrence probes for every position.
    Probes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatagenConfig {
    pub set: DataSet,
    pub count: usize,
    pub start: u64,
    pub pos_a: usize,
    pub pos_b: usize,
    pub data: DataConfig,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig { set: DataSet::Train, count: 1000, start: 0, pos_a: 1, pos_b: 8, data: DataConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRunConfig {
    pub precision: Precision,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig {
            precision: Precision::F32,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalRunConfig {
    pub checkpoint: Option<PathBuf>,
    pub precision: Precision,
    /// Seed of the test sets; the checkpoint's data seed when absent.
    pub seed: Option<u64>,
    pub eval: EvalConfig,
}

impl Default for EvalRunConfig {
    fn default() -> Self {
        EvalRunConfig { checkpoint: None, precision: Precision::F32, seed: None, eval: EvalConfig::default() }
    }
}

/// Parses `path`, or returns the defaults when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            parse(&text).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                other => other,
            })
        }
    }
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
}

pub fn to_toml<T: Serialize>(cfg: &T) -> Result<String, CliError> {
    toml::to_string(cfg).map_err(|e| CliError::Numeric(format!("cannot serialise config: {e}")))
}

/// Writes the resolved config to `<out>/resolved.toml`.
pub fn echo<T: Serialize>(cfg: &T, out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    fs::write(out.join(RESOLVED), to_toml(cfg)?)?;
    Ok(())
}
