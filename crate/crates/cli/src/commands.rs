//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use posbias_core::export::{write_csv_schema, write_cumulative_blob, write_rollout_csv, SCHEMA_VERSION};
use posbias_core::seed::{derive_seed, stream_rng};
use posbias_core::theory::suites::random_unit_rows;
use posbias_core::theory::{attention_sink_metric, mean_sink_report, run_suites, verify_center_convergence, SinkReport};
use posbias_core::{init_stack, rollout_scaled, MaskGraph};
use posbias_train::checkpoint::{load_checkpoint, manifest_for, save_checkpoint, CheckpointManifest};
use posbias_train::data::{build_class_bank, build_novel_test_pairs, build_position_probes, sequence_at, SequenceSample, TestPairSpec};
use posbias_train::eval::{evaluate_gaps, sink_scores, standard_pairs, Trained};
use posbias_train::experiment::{run_experiment, ExperimentConfig, Precision};
use posbias_train::model::{stack_tokens, Network, Real};
use posbias_train::trainer::{train, write_log_csv};
use serde::Serialize;
use serde_json::json;

use crate::config::{echo, load, DataSet, DatagenConfig, EvalRunConfig, RolloutConfig, SinksConfig, TrainRunConfig, VerifyConfig};
use crate::{Cli, CliError, Command, ExperimentArgs};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let result = run_command(cli);
    // Index whatever CSVs were written, even by a failed experiment.
    if cli.out.is_dir() {
        index_csvs(&cli.out)?;
    }
    if let Command::Experiment(ExperimentArgs { runs_dir: Some(runs), .. }) = &cli.command {
        if runs.is_dir() {
            index_csvs(runs)?;
        }
    }
    result
}

/// Writes `schema.json` into every directory under `root` holding CSVs.
fn index_csvs(root: &Path) -> Result<(), CliError> {
    let mut has_csv = false;
    for entry in fs::read_dir(root)? {
        let path = entry?.path();
        if path.is_dir() {
            index_csvs(&path)?;
        } else if path.extension().is_some_and(|e| e == "csv") {
            has_csv = true;
        }
    }
    if has_csv {
        write_csv_schema(root)?;
    }
    Ok(())
}

fn run_command(cli: &Cli) -> Result<(), CliError> {
    let cfg_path = cli.config.as_deref();
    match &cli.command {
        Command::Rollout(a) => {
            let mut cfg: RolloutConfig = load(cfg_path)?;
            if !a.mask.is_empty() {
                cfg.masks = a.mask.iter().map(|m| m.parse()).collect::<Result<_, _>>().map_err(|e: posbias_core::Error| CliError::Config(format!("--mask: {e}")))?;
            }
            if !a.pe.is_empty() {
                cfg.pes = a.pe.iter().map(|p| p.parse()).collect::<Result<_, _>>().map_err(|e: posbias_core::Error| CliError::Config(format!("--pe: {e}")))?;
            }
            cfg.n = a.n.unwrap_or(cfg.n);
            cfg.d = a.d.unwrap_or(cfg.d);
            cfg.depth = a.depth.unwrap_or(cfg.depth);
            cfg.seeds = a.seeds.unwrap_or(cfg.seeds);
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            cmd_rollout(&cfg, &cli.out)
        }
        Command::Verify(a) => {
            let mut cfg: VerifyConfig = load(cfg_path)?;
            if !a.suite.is_empty() {
                cfg.suites = a.suite.clone();
            }
            if !a.grid_t.is_empty() {
                cfg.settings.grid_t = a.grid_t.clone();
            }
            if a.inject_fault.is_some() {
                cfg.settings.inject_fault = a.inject_fault.clone();
            }
            cfg.settings.seed = cli.seed.unwrap_or(cfg.settings.seed);
            cmd_verify(&cfg, &cli.out)
        }
        Command::Sinks(a) => {
            let mut cfg: SinksConfig = load(cfg_path)?;
            cfg.checkpoint = a.checkpoint.clone().or(cfg.checkpoint);
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            cmd_sinks(&cfg, &cli.out)
        }
        Command::Datagen => {
            let mut cfg: DatagenConfig = load(cfg_path)?;
            cfg.data.seed = cli.seed.unwrap_or(cfg.data.seed);
            cmd_datagen(&cfg, &cli.out)
        }
        Command::Train => {
            let mut cfg: TrainRunConfig = load(cfg_path)?;
            if let Some(s) = cli.seed {
                cfg.data.seed = s;
                cfg.train.init_seed = s;
            }
            cmd_train(&cfg, &cli.out)
        }
        Command::Eval(a) => {
            let mut cfg: EvalRunConfig = load(cfg_path)?;
            cfg.checkpoint = a.checkpoint.clone().or(cfg.checkpoint);
            cfg.seed = cli.seed.or(cfg.seed);
            cmd_eval(&cfg, &cli.out)
        }
        Command::Experiment(a) => {
            let mut cfg: ExperimentConfig = load(cfg_path)?;
            if let Some(s) = cli.seed {
                cfg.seeds = (s..s + cfg.seeds.len() as u64).collect();
            }
            cmd_experiment(&cfg, &cli.out, a.runs_dir.as_deref(), cli.jobs, a.resume)
        }
    }
}

fn safe_name(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '-' }).collect()
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn progress(msg: &str) {
    eprintln!("{msg}");
}

pub fn cmd_rollout(cfg: &RolloutConfig, out: &Path) -> Result<(), CliError> {
    if cfg.seeds == 0 || cfg.depth == 0 || cfg.d == 0 || cfg.masks.is_empty() || cfg.pes.is_empty() {
        return Err(CliError::Config("seeds, depth, d, masks and pes must be non-empty".into()));
    }
    if !(cfg.temperature > 0.0) {
        return Err(CliError::Config(format!("temperature must be > 0, got {}", cfg.temperature)));
    }
    for m in &cfg.masks {
        m.validate(cfg.n).map_err(|e| CliError::Config(format!("masks: {e}")))?;
    }
    for p in &cfg.pes {
        p.validate(cfg.d).map_err(|e| CliError::Config(format!("pes: {e}")))?;
    }
    echo(cfg, out)?;
    for mask in &cfg.masks {
        let g = MaskGraph::new(*mask, cfg.n)?;
        for pe in &cfg.pes {
            let dir = out.join("rollout").join(safe_name(&format!("{mask}_{pe}")));
            fs::create_dir_all(&dir)?;
            for i in 0..cfg.seeds {
                let stack = init_stack(cfg.d, cfg.depth, cfg.c_bound, derive_seed(cfg.seed, "rollout", i))?;
                let x0 = random_unit_rows(&mut stream_rng(cfg.seed, "rollout/inputs", i), cfg.n, cfg.d);
                let tr = rollout_scaled(x0.view(), &stack, &g, pe, cfg.temperature)?;
                write_rollout_csv(&tr, fs::File::create(dir.join(format!("trace-{i}.csv")))?)?;
                write_json(&dir.join(format!("report-{i}.json")), &verify_center_convergence(&tr, &g, cfg.tol)?)?;
                if cfg.blobs {
                    write_cumulative_blob(&tr, &dir.join(format!("cumulative-{i}.bin")), &dir.join(format!("cumulative-{i}.json")))?;
                }
            }
            progress(&format!("rollout {mask} {pe}: {} traces in {}", cfg.seeds, dir.display()));
        }
    }
    Ok(())
}

pub fn cmd_verify(cfg: &VerifyConfig, out: &Path) -> Result<(), CliError> {
    cfg.settings.validate()?;
    echo(cfg, out)?;
    let verdicts = run_suites(&cfg.suites, &cfg.settings)?;
    let dir = out.join("verify");
    fs::create_dir_all(&dir)?;
    let mut failed = Vec::new();
    for v in &verdicts {
        write_json(&dir.join(format!("{}.json", v.suite)), v)?;
        println!("{} {}", if v.pass { "PASS" } else { "FAIL" }, v.suite);
        if !v.pass {
            failed.push(format!("{}: {}", v.suite, v.failures.first().map_or("", String::as_str)));
        }
    }
    let summary: Vec<_> = verdicts.iter().map(|v| json!({ "suite": v.suite, "pass": v.pass })).collect();
    write_json(&dir.join("summary.json"), &json!({ "schema": SCHEMA_VERSION, "suites": summary }))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Suite(failed.join("; ")))
    }
}

fn checkpoint_paths(manifest: &Path) -> (PathBuf, PathBuf) {
    (manifest.with_extension("bin"), manifest.to_path_buf())
}

fn write_sink_csv(rep: &SinkReport, path: &Path) -> Result<(), CliError> {
    let mut w = fs::File::create(path)?;
    writeln!(w, "token,score")?;
    for (j, s) in rep.scores.iter().enumerate() {
        writeln!(w, "{},{s:.6}", j + 1)?;
    }
    Ok(())
}

fn checkpoint_sinks<F: Real>(path: &Path, cfg: &SinksConfig) -> Result<SinkReport, CliError> {
    let (bin, json) = checkpoint_paths(path);
    let (params, m) = load_checkpoint::<F>(&bin, &json)?;
    let bank = build_class_bank(&m.data)?;
    let net = Network::<F>::new(&m.model, m.data.tokens())?;
    Ok(sink_scores(&net, &params, &bank, &m.data, cfg.count, cfg.tau)?)
}

pub fn cmd_sinks(cfg: &SinksConfig, out: &Path) -> Result<(), CliError> {
    if !(cfg.tau > 0.0 && cfg.tau <= 1.0) {
        return Err(CliError::Config(format!("tau must lie in (0, 1], got {}", cfg.tau)));
    }
    echo(cfg, out)?;
    if let Some(path) = &cfg.checkpoint {
        if cfg.count == 0 {
            return Err(CliError::Config("count must be positive".into()));
        }
        let rep = match cfg.precision {
            Precision::F32 => checkpoint_sinks::<f32>(path, cfg)?,
            Precision::F64 => checkpoint_sinks::<f64>(path, cfg)?,
        };
        write_json(&out.join("sinks.json"), &rep)?;
        write_sink_csv(&rep, &out.join("sinks.csv"))?;
        println!("top tokens: {:?}", &rep.ranking()[..rep.scores.len().min(5)]);
        return Ok(());
    }
    if cfg.seeds == 0 {
        return Err(CliError::Config("seeds must be positive".into()));
    }
    cfg.pe.validate(cfg.d)?;
    for mask in &cfg.masks {
        mask.validate(cfg.n)?;
        let g = MaskGraph::new(*mask, cfg.n)?;
        let reports = (0..cfg.seeds)
            .map(|i| {
                let stack = init_stack(cfg.d, cfg.depth, cfg.c_bound, derive_seed(cfg.seed, "sinks", i))?;
                let x0 = random_unit_rows(&mut stream_rng(cfg.seed, "sinks/inputs", i), cfg.n, cfg.d);
                let tr = rollout_scaled(x0.view(), &stack, &g, &cfg.pe, 1.0)?;
                attention_sink_metric(&tr.maps, &g, cfg.tau)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rep = mean_sink_report(&reports)?;
        let name = safe_name(&mask.to_string());
        write_json(&out.join(format!("sinks-{name}.json")), &rep)?;
        write_sink_csv(&rep, &out.join(format!("sinks-{name}.csv")))?;
        println!("{mask}: top tokens {:?}", &rep.ranking()[..rep.scores.len().min(5)]);
    }
    Ok(())
}

fn write_records(dir: &Path, name: &str, samples: &[SequenceSample]) -> Result<serde_json::Value, CliError> {
    let mats: Vec<_> = samples.iter().map(|s| &s.tokens).collect();
    let tokens = stack_tokens::<f64>(&mats)?;
    let mut bytes = Vec::with_capacity(tokens.len() * 8);
    for v in tokens.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join(format!("{name}.bin")), bytes)?;
    let mut csv = fs::File::create(dir.join(format!("{name}.csv")))?;
    writeln!(csv, "index,target_label,query_position,answer_positions")?;
    for (i, s) in samples.iter().enumerate() {
        let ans: Vec<String> = s.answer_positions.iter().map(|p| p.to_string()).collect();
        writeln!(csv, "{i},{},{},{}", s.target_label, s.query_position, ans.join(";"))?;
    }
    Ok(json!({ "name": name, "records": samples.len(), "shape": tokens.shape(), "dtype": "f64-le", "order": "row-major" }))
}

pub fn cmd_datagen(cfg: &DatagenConfig, out: &Path) -> Result<(), CliError> {
    cfg.data.validate()?;
    if cfg.count == 0 {
        return Err(CliError::Config("count must be positive".into()));
    }
    echo(cfg, out)?;
    let bank = build_class_bank(&cfg.data)?;
    let mut files = Vec::new();
    match cfg.set {
        DataSet::Train => {
            let samples = (cfg.start..cfg.start + cfg.count as u64)
                .map(|i| sequence_at(&bank, &cfg.data, "train", i))
                .collect::<Result<Vec<_>, _>>()?;
            files.push(write_records(out, "train", &samples)?);
        }
        DataSet::Pairs => {
            let (a, b) = (cfg.pos_a, cfg.pos_b);
            let (ab, ba) = build_novel_test_pairs(&bank, &cfg.data, TestPairSpec::new(a, b), cfg.count, cfg.data.seed)?;
            files.push(write_records(out, &format!("pairs-{a}-{b}"), &ab)?);
            files.push(write_records(out, &format!("pairs-{b}-{a}"), &ba)?);
        }
        DataSet::Probes => {
            for (p, set) in build_position_probes(&bank, &cfg.data, cfg.count, cfg.data.seed)?.iter().enumerate() {
                files.push(write_records(out, &format!("probe-{}", p + 1), set)?);
            }
        }
    }
    write_json(&out.join("manifest.json"), &json!({ "schema": SCHEMA_VERSION, "config": cfg, "files": files }))?;
    progress(&format!("datagen: {} file(s) in {}", files.len(), out.display()));
    Ok(())
}

fn train_typed<F: Real>(cfg: &TrainRunConfig, out: &Path) -> Result<(), CliError> {
    let bank = build_class_bank(&cfg.data)?;
    let every = (cfg.train.iterations / 10).max(1);
    let outcome = train::<F>(&cfg.model, &cfg.data, &bank, &cfg.train, |row| {
        if row.iteration % every == 0 {
            progress(&format!("iteration {} loss {:.4} ({:.0}s)", row.iteration, row.loss, row.wall_s));
        }
    })?;
    write_log_csv(&outcome.log, fs::File::create(out.join("train_log.csv"))?)?;
    let m = manifest_for(&outcome.params, &cfg.model, &cfg.data, &cfg.train, cfg.train.iterations);
    save_checkpoint(&outcome.params, &m, &out.join("params.bin"), &out.join("params.json"))?;
    Ok(())
}

pub fn cmd_train(cfg: &TrainRunConfig, out: &Path) -> Result<(), CliError> {
    cfg.data.validate()?;
    cfg.model.validate(cfg.data.tokens())?;
    cfg.train.validate()?;
    echo(cfg, out)?;
    match cfg.precision {
        Precision::F32 => train_typed::<f32>(cfg, out),
        Precision::F64 => train_typed::<f64>(cfg, out),
    }
}

fn eval_typed<F: Real>(cfg: &EvalRunConfig, path: &Path, out: &Path) -> Result<(), CliError> {
    let (bin, json) = checkpoint_paths(path);
    let (params, m): (_, CheckpointManifest) = load_checkpoint::<F>(&bin, &json)?;
    let bank = build_class_bank(&m.data)?;
    let net = Network::<F>::new(&m.model, m.data.tokens())?;
    let seed = cfg.seed.unwrap_or(m.data.seed);
    let pred = Trained { net: &net, params: &params };
    let rep = evaluate_gaps(&pred, &bank, &m.data, &standard_pairs(&m.data), cfg.eval.pairs, cfg.eval.probes, seed)?;
    write_json(&out.join("eval.json"), &rep)?;
    rep.write_csv(fs::File::create(out.join("eval.csv"))?)?;
    for p in &rep.pairs {
        println!("{}: [{}*;{}] {:.4}  [{}*;{}] {:.4}  gap {:+.4}", p.name, p.pos_a, p.pos_b, p.acc_ab, p.pos_b, p.pos_a, p.acc_ba, p.gap);
    }
    if cfg.eval.sinks > 0 {
        let s = sink_scores(&net, &params, &bank, &m.data, cfg.eval.sinks, cfg.eval.tau)?;
        write_json(&out.join("sinks.json"), &s)?;
        write_sink_csv(&s, &out.join("sinks.csv"))?;
    }
    Ok(())
}

pub fn cmd_eval(cfg: &EvalRunConfig, out: &Path) -> Result<(), CliError> {
    let path = cfg.checkpoint.as_deref().ok_or_else(|| CliError::Config("checkpoint: no checkpoint given".into()))?;
    if cfg.eval.pairs == 0 || !(cfg.eval.tau > 0.0 && cfg.eval.tau <= 1.0) {
        return Err(CliError::Config("eval.pairs must be positive and eval.tau in (0, 1]".into()));
    }
    echo(cfg, out)?;
    match cfg.precision {
        Precision::F32 => eval_typed::<f32>(cfg, path, out),
        Precision::F64 => eval_typed::<f64>(cfg, path, out),
    }
}

pub fn cmd_experiment(cfg: &ExperimentConfig, out: &Path, runs: Option<&Path>, jobs: usize, resume: bool) -> Result<(), CliError> {
    cfg.validate()?;
    echo(cfg, out)?;
    let runs = runs.map_or_else(|| out.join("runs"), Path::to_path_buf);
    let outcome = run_experiment(cfg, out, &runs, jobs, resume, &progress)?;
    let failures = outcome.failures();
    if failures.is_empty() {
        Ok(())
    } else {
        let first = &failures[0];
        Err(CliError::Numeric(format!(
            "{} of {} runs failed; first: {} seed {}: {}",
            failures.len(),
            outcome.runs.len(),
            first.cell,
            first.seed,
            first.error
        )))
    }
}
