//! One PASS/FAIL line per acceptance criterion.
//!
//! The retrieval experiments reuse finished runs under `results/runs` (same
//! resolved spec, see `--resume`); missing runs are trained here, which takes
//! hours on one core. A failing criterion is reported, not hidden: the
//! process still exits 0 so the rest of the workspace tests stay usable.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use posbias_core::theory::suites::{run_suite, VerifySettings};
use posbias_core::{init_stack, rollout, MaskGraph, MaskKind, PeMode};
use posbias_train::experiment::{run_experiment, Cell, ExperimentConfig, ExperimentOutcome, RunResult};
use posbias_train::gradcheck::check_gradients;
use posbias_train::model::{ModelConfig, Rows};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    pass: bool,
    name: &'static str,
    detail: String,
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn suite(name: &'static str, suite: &str, budget_s: Option<f64>) -> Line {
    let t = Instant::now();
    let v = run_suite(suite, &VerifySettings::default());
    let secs = t.elapsed().as_secs_f64();
    match v {
        Ok(v) => {
            let in_time = budget_s.is_none_or(|b| secs < b);
            let mut detail = format!("{suite} in {secs:.1}s");
            if let Some(f) = v.failures.first() {
                detail += &format!("; {} failure(s), first: {f}", v.failures.len());
            }
            if !in_time {
                detail += &format!("; over the {}s budget", budget_s.unwrap());
            }
            Line { pass: v.pass && in_time, name, detail }
        }
        Err(e) => Line { pass: false, name, detail: format!("{suite}: {e}") },
    }
}

/// `Σ_{k_t..k_1} A^(t)_{i k_t} ⋯ A^(0)_{k_1 j}` by explicit enumeration.
fn path_sum(maps: &[&Array2<f64>], i: usize, j: usize) -> f64 {
    let (a, rest) = maps.split_last().expect("at least one layer");
    if rest.is_empty() {
        return a[[i, j]];
    }
    (0..a.ncols()).map(|k| a[[i, k]] * path_sum(rest, k, j)).sum()
}

fn rollout_correctness() -> Line {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=6 {
        let kinds = [
            MaskKind::Causal,
            MaskKind::SlidingWindow { width: 2 },
            MaskKind::Prefix { prefix_len: (n / 2).max(1) },
            MaskKind::Complete,
        ];
        for kind in kinds {
            if kind.validate(n).is_err() {
                continue;
            }
            for depth in 1..=5 {
                let d = 4;
                let stack = init_stack(d, depth, 1.5, rng.random()).unwrap();
                let x0 = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
                let tr = rollout(x0.view(), &stack, &MaskGraph::new(kind, n).unwrap(), &PeMode::NoPe).unwrap();
                for t in 0..depth {
                    let maps: Vec<&Array2<f64>> = tr.maps[..=t].iter().map(|m| &m.0).collect();
                    for i in 0..n {
                        for j in 0..n {
                            worst = worst.max((tr.cumulative[t][[i, j]] - path_sum(&maps, i, j)).abs());
                        }
                    }
                }
                cases += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Line {
        pass: worst <= 1e-10 && secs < 60.0,
        name: "rollout correctness",
        detail: format!("{cases} cases (4 masks, N <= 6, depth <= 5), max |P - paths| = {worst:.1e}, {secs:.1}s"),
    }
}

fn gradient_checks() -> Line {
    let t = Instant::now();
    let masks = [
        MaskKind::Causal,
        MaskKind::SlidingWindow { width: 3 },
        MaskKind::Prefix { prefix_len: 2 },
        MaskKind::Complete,
    ];
    let mut worst = (0.0f64, String::new());
    let mut combos = 0;
    for mask in masks {
        for pe in ["nope", "sin", "decay", "rope"] {
            for residual in [false, true] {
                combos += 1;
                let cfg = ModelConfig { depth: 2, residual, mask, pe: pe.parse().unwrap(), dim: 6, hidden: 6, l_labels: 4 };
                // n = 3 items: 7 tokens.
                match check_gradients(&cfg, 7, 4, combos, Rows::QueryOnly) {
                    Ok(r) if r.max_rel_error > worst.0 => worst = (r.max_rel_error, format!("{mask} {pe} residual={residual}: {}", r.worst)),
                    Ok(_) => {}
                    Err(e) => worst = (f64::INFINITY, format!("{mask} {pe}: {e}")),
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Line {
        pass: worst.0 < 1e-4 && secs < 120.0,
        name: "gradient checks",
        detail: format!("{combos} mask x PE x residual combinations, max rel err {:.1e} ({}), {secs:.1}s", worst.0, worst.1),
    }
}

fn experiment(name: &str) -> Result<(ExperimentConfig, ExperimentOutcome), String> {
    let r = root();
    let path = r.join("configs/acceptance").join(format!("{name}.toml"));
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| e.to_string())?;
    let outcome = run_experiment(&cfg, &r.join("results/acceptance").join(name), &r.join("results/runs"), 1, true, &|m| eprintln!("{m}"))
        .map_err(|e| e.to_string())?;
    if let Some(f) = outcome.failures().first() {
        return Err(format!("{} seed {} failed: {}", f.cell, f.seed, f.error));
    }
    Ok((cfg, outcome))
}

fn cell_where<'a>(cfg: &ExperimentConfig, out: &'a ExperimentOutcome, pred: impl Fn(&Cell) -> bool) -> Vec<&'a RunResult> {
    let cell = cfg.cells().into_iter().find(|c| pred(c)).expect("cell in grid");
    out.results_for(&cell)
}

fn gap(r: &RunResult, pair: &str) -> f64 {
    r.eval.pair(pair).expect("standard pair").gap
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn fmt(xs: &[f64]) -> String {
    let s: Vec<String> = xs.iter().map(|x| format!("{x:+.3}")).collect();
    format!("[{}]", s.join(" "))
}

fn fig2() -> Line {
    let name = "depth and encoding gap signs";
    let (cfg, out) = match experiment("fig2") {
        Ok(v) => v,
        Err(e) => return Line { pass: false, name, detail: e },
    };
    let gaps = |pe: &str, depth: usize| -> Vec<f64> {
        cell_where(&cfg, &out, |c| c.pe.to_string().starts_with(pe) && c.depth == depth).iter().map(|r| gap(r, "first-last")).collect()
    };
    let mut detail = Vec::new();
    let mut a = true;
    let mut c = true;
    for &depth in &cfg.grid.depths {
        let (nope, decay) = (gaps("nope", depth), gaps("decay", depth));
        let positive = nope.iter().filter(|g| **g > 0.0).count();
        a &= positive >= 4;
        c &= mean(&decay) < mean(&nope);
        detail.push(format!("depth {depth}: nope {} ({positive}/5 > 0, mean {:+.3}), decay mean {:+.3}", fmt(&nope), mean(&nope), mean(&decay)));
    }
    let b = mean(&gaps("nope", 6)) > mean(&gaps("nope", 2));
    detail.push(format!("(a) {a} (b) {b} (c) {c}"));
    Line { pass: a && b && c, name, detail: detail.join("; ") }
}

fn fig3() -> Line {
    let name = "first-and-last bias gap signs";
    let (cfg, out) = match experiment("fig3") {
        Ok(v) => v,
        Err(e) => return Line { pass: false, name, detail: e },
    };
    let runs = |pe: &str| cell_where(&cfg, &out, |c| c.pe.to_string().starts_with(pe));
    // Last-token advantage over the middle is minus the middle-last gap.
    let nope_ok = runs("nope").iter().filter(|r| gap(r, "first-middle") > 0.0 && gap(r, "middle-last") >= 0.0).count();
    let both_ends = |pe: &str| runs(pe).iter().filter(|r| gap(r, "first-middle") > 0.0 && gap(r, "middle-last") < 0.0).count();
    let (sin_ok, rope_ok) = (both_ends("sin"), both_ends("rope"));
    let show = |pe: &str| {
        let rs = runs(pe);
        format!(
            "{pe}: first-middle {} middle-last {}",
            fmt(&rs.iter().map(|r| gap(r, "first-middle")).collect::<Vec<_>>()),
            fmt(&rs.iter().map(|r| gap(r, "middle-last")).collect::<Vec<_>>())
        )
    };
    Line {
        pass: nope_ok >= 4 && sin_ok >= 4 && rope_ok >= 4,
        name,
        detail: format!(
            "seeds matching: nope {nope_ok}/5, sin {sin_ok}/5, rope {rope_ok}/5; {}; {}; {}",
            show("nope"),
            show("sin"),
            show("rope")
        ),
    }
}

fn sinks() -> Line {
    let name = "attention sinks";
    let (cfg, out) = match experiment("sinks") {
        Ok(v) => v,
        Err(e) => return Line { pass: false, name, detail: e },
    };
    let scores = |mask: MaskKind| -> Vec<Vec<f64>> {
        cell_where(&cfg, &out, |c| c.mask == mask).iter().map(|r| r.sink_scores.clone().expect("sink scores")).collect()
    };
    // Top-k strictly separated from the rest.
    let top_is_prefix = |s: &[f64], k: usize| {
        let low = s[..k].iter().copied().fold(f64::INFINITY, f64::min);
        s[k..].iter().all(|&x| x < low)
    };
    let mut detail = Vec::new();
    let causal = scores(MaskKind::Causal);
    let causal_ok = causal.iter().filter(|s| top_is_prefix(s, 1)).count();
    let s1: Vec<f64> = causal.iter().map(|s| s[0]).collect();
    let best_other: Vec<f64> = causal.iter().map(|s| s[1..].iter().copied().fold(0.0, f64::max)).collect();
    detail.push(format!("causal s1 > rest in {causal_ok}/5 (s1 {} vs max other {})", fmt(&s1), fmt(&best_other)));
    let mut pass = causal_ok >= 4;
    for mask in &cfg.grid.masks {
        if let MaskKind::Prefix { prefix_len: k } = *mask {
            let ok = scores(*mask).iter().filter(|s| top_is_prefix(s, k)).count();
            pass &= ok >= 4;
            detail.push(format!("prefix K={k}: top-{k} = 1..{k} in {ok}/5"));
        }
    }
    Line { pass, name, detail: detail.join("; ") }
}

fn main() {
    let lines: Vec<Box<dyn Fn() -> Line>> = vec![
        Box::new(rollout_correctness),
        Box::new(|| suite("causal convergence", "center-convergence", Some(60.0))),
        Box::new(|| suite("sliding-window ordering", "window-ordering", None)),
        Box::new(|| suite("prefix floor", "prefix-floor", None)),
        Box::new(|| suite("decay lemma constructive check", "decay-envelope", None)),
        Box::new(|| suite("aggregate decay", "aggregate-decay", None)),
        Box::new(|| suite("RoPE lemma", "rope-lemma", None)),
        Box::new(|| suite("RoPE aggregate critical points", "critical-points", None)),
        Box::new(|| suite("general-d segment bound", "segment-bounds", None)),
        Box::new(gradient_checks),
        Box::new(fig2),
        Box::new(fig3),
        Box::new(sinks),
    ];
    let mut passed = 0;
    for (i, f) in lines.iter().enumerate() {
        let l = f();
        passed += l.pass as usize;
        println!("{} [{:>2}] {}: {}", if l.pass { "PASS" } else { "FAIL" }, i + 1, l.name, l.detail);
    }
    println!("{passed}/{} criteria passed", lines.len());
}
