//! Parameter checkpoints: a little-endian f64 blob plus a JSON manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use posbias_core::export::SCHEMA_VERSION;

use crate::data::DataConfig;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Params, Real};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub schema: u32,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub iteration: usize,
    /// Blob layout, in order.
    pub tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint<F: Real>(params: &Params<F>, manifest: &CheckpointManifest, blob: &Path, json: &Path) -> Result<()> {
    let tensors = params.tensors();
    let want: Vec<TensorEntry> =
        params.tensor_names().into_iter().zip(&tensors).map(|(name, t)| TensorEntry { name, len: t.len() }).collect();
    if want != manifest.tensors {
        return Err(Error::Checkpoint("manifest tensor list does not match the parameters".into()));
    }
    let mut bytes = Vec::with_capacity(params.len() * 8);
    for t in tensors {
        for v in t {
            bytes.extend_from_slice(&v.to_f64().unwrap_or(f64::NAN).to_le_bytes());
        }
    }
    fs::write(blob, bytes)?;
    fs::write(json, serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

/// Manifest for `params` trained under the given configs.
pub fn manifest_for<F: Real>(
    params: &Params<F>,
    model: &ModelConfig,
    data: &DataConfig,
    train: &TrainConfig,
    iteration: usize,
) -> CheckpointManifest {
    CheckpointManifest {
        schema: SCHEMA_VERSION,
        model: model.clone(),
        data: data.clone(),
        train: train.clone(),
        seed: data.seed,
        iteration,
        tensors: params
            .tensor_names()
            .into_iter()
            .zip(params.tensors())
            .map(|(name, t)| TensorEntry { name, len: t.len() })
            .collect(),
    }
}

pub fn load_checkpoint<F: Real>(blob: &Path, json: &Path) -> Result<(Params<F>, CheckpointManifest)> {
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(json)?)?;
    if manifest.schema != SCHEMA_VERSION {
        return Err(Error::Checkpoint(format!("schema {} (expected {SCHEMA_VERSION})", manifest.schema)));
    }
    let mut params = Params::<F>::zeros(&manifest.model);
    let names = params.tensor_names();
    let bytes = fs::read(blob)?;
    if bytes.len() != params.len() * 8 {
        return Err(Error::Checkpoint(format!("blob holds {} bytes, model needs {}", bytes.len(), params.len() * 8)));
    }
    let mut values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for ((t, name), entry) in params.tensors_mut().into_iter().zip(names).zip(&manifest.tensors) {
        if entry.name != name || entry.len != t.len() {
            return Err(Error::Checkpoint(format!("tensor {} does not match manifest entry {}", name, entry.name)));
        }
        for v in t.iter_mut() {
            *v = crate::model::cast(values.next().expect("length checked"));
        }
    }
    if manifest.tensors.len() != params.tensors().len() {
        return Err(Error::Checkpoint("manifest lists a different number of tensors".into()));
    }
    Ok((params, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_in_f64() {
        let model = ModelConfig { dim: 4, hidden: 3, l_labels: 5, ..ModelConfig::default() };
        let data = DataConfig { dim: 4, l_labels: 5, ..DataConfig::default() };
        let p = Params::<f64>::init(&model, 9);
        let dir = std::env::temp_dir().join(format!("ckpt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let (b, j) = (dir.join("p.bin"), dir.join("p.json"));
        let m = manifest_for(&p, &model, &data, &TrainConfig::default(), 17);
        save_checkpoint(&p, &m, &b, &j).unwrap();
        let (q, m2) = load_checkpoint::<f64>(&b, &j).unwrap();
        assert_eq!(m, m2);
        assert_eq!(p.tensors(), q.tensors());
        fs::write(&b, [0u8; 16]).unwrap();
        assert!(matches!(load_checkpoint::<f64>(&b, &j), Err(Error::Checkpoint(_))));
        fs::remove_dir_all(dir).unwrap();
    }
}
