//! CSV and binary exports for traces.
//!
//! * rollout CSV: `t,i,j,a,p` with 1-based `i, j`; `a` is the layer-`t` map
//!   entry and `p` the cumulative probability `P^(t)_ij`.
//! * binary matrices: 64-bit little-endian reals, row-major, with a JSON
//!   sidecar `{schema, dtype, order, shape}`.
//! * `schema.json` next to CSV files: `{schema, files: {name: [columns]}}`.

use std::fs::File;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::RolloutTrace;

pub const SCHEMA_VERSION: u32 = 1;

pub fn write_rollout_csv<W: Write>(trace: &RolloutTrace, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "t,i,j,a,p")?;
    for (t, (a, p)) in trace.maps.iter().zip(&trace.cumulative).enumerate() {
        let n = a.n();
        for i in 0..n {
            for j in 0..n {
                writeln!(w, "{t},{},{},{:e},{:e}", i + 1, j + 1, a.get(i, j), p[[i, j]])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSidecar {
    pub schema: u32,
    pub dtype: String,
    pub order: String,
    pub shape: Vec<usize>,
}

pub fn write_f64_blob(data: &[f64], shape: &[usize], bin: &Path, sidecar: &Path) -> Result<()> {
    if shape.iter().product::<usize>() != data.len() {
        return Err(Error::Shape(format!("shape {shape:?} does not hold {} values", data.len())));
    }
    let mut w = BufWriter::new(File::create(bin)?);
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let meta = BlobSidecar {
        schema: SCHEMA_VERSION,
        dtype: "f64-le".into(),
        order: "row-major".into(),
        shape: shape.to_vec(),
    };
    std::fs::write(sidecar, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_f64_blob(bin: &Path, sidecar: &Path) -> Result<(Vec<f64>, Vec<usize>)> {
    let meta: BlobSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar)?)?;
    if meta.dtype != "f64-le" || meta.order != "row-major" {
        return Err(Error::InvalidArgument(format!(
            "unsupported blob layout {}/{}",
            meta.dtype, meta.order
        )));
    }
    let mut bytes = Vec::new();
    File::open(bin)?.read_to_end(&mut bytes)?;
    let expected = meta.shape.iter().product::<usize>() * 8;
    if bytes.len() != expected {
        return Err(Error::Shape(format!("blob has {} bytes, sidecar implies {expected}", bytes.len())));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((data, meta.shape))
}

/// Stacks the cumulative products into a `(T, N, N)` blob.
pub fn write_cumulative_blob(trace: &RolloutTrace, bin: &Path, sidecar: &Path) -> Result<()> {
    let n = trace.n();
    let mut stacked = Array3::<f64>::zeros((trace.depth(), n, n));
    for (t, p) in trace.cumulative.iter().enumerate() {
        stacked.index_axis_mut(ndarray::Axis(0), t).assign(p);
    }
    let data: Vec<f64> = stacked.iter().copied().collect();
    write_f64_blob(&data, &[trace.depth(), n, n], bin, sidecar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub schema: u32,
    /// Column names of every CSV in the directory, keyed by file name.
    pub files: BTreeMap<String, Vec<String>>,
}

/// Writes `dir/schema.json` describing every `*.csv` directly in `dir`
/// from its header line.
pub fn write_csv_schema(dir: &Path) -> Result<CsvSchema> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_none_or(|e| e != "csv") {
            continue;
        }
        let mut header = String::new();
        BufReader::new(File::open(&path)?).read_line(&mut header)?;
        let cols = header.trim_end().split(',').map(str::to_owned).collect();
        let name = path.file_name().expect("file has a name").to_string_lossy().into_owned();
        files.insert(name, cols);
    }
    let out = CsvSchema { schema: SCHEMA_VERSION, files };
    std::fs::write(dir.join("schema.json"), serde_json::to_string_pretty(&out)? + "\n")?;
    Ok(out)
}

pub fn matrix_from_blob(data: Vec<f64>, shape: &[usize]) -> Result<Array2<f64>> {
    match shape {
        [r, c] => Array2::from_shape_vec((*r, *c), data).map_err(|e| Error::Shape(e.to_string())),
        _ => Err(Error::Shape(format!("expected a 2-d shape, got {shape:?}"))),
    }
}
