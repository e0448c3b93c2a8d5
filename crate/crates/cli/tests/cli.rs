//! Exit codes, artifact contracts and config echo round trips of the binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn posbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posbias")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("posbias-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_in(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == ext)).collect();
    v.sort();
    v
}

const TINY_DATA: &str = "[data]\nk_classes = 16\nl_labels = 4\ndim = 8\n";

#[test]
fn window_width_one_is_a_config_error() {
    let dir = scratch("w1");
    let o = posbias(&["rollout", "--mask", "window:w=1", "--out", s(&dir)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("w >= 2"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_rejected_by_name() {
    let dir = scratch("typo");
    let cfg = dir.join("c.toml");
    fs::write(&cfg, "n = 8\ndeptth = 3\n").unwrap();
    let o = posbias(&["rollout", "--config", s(&cfg), "--out", s(&dir)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("deptth"), "{}", stderr(&o));
    fs::write(&cfg, "name = \"x\"\n[train]\nitrations = 3\n").unwrap();
    let o = posbias(&["experiment", "--config", s(&cfg), "--out", s(&dir)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("itrations"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(posbias(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(posbias(&["eval", "--out", s(&scratch("nockpt"))]).status.code(), Some(1));
    assert_eq!(posbias(&["--help"]).status.code(), Some(0));
}

#[test]
fn rollout_writes_one_trace_and_report_per_seed_deterministically() {
    let (a, b) = (scratch("ra"), scratch("rb"));
    for dir in [&a, &b] {
        let o = posbias(&["rollout", "--mask", "causal", "--n", "16", "--d", "8", "--depth", "64", "--seeds", "5", "--out", s(dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ta = a.join("rollout/causal_nope");
    assert_eq!(files_in(&ta, "csv").len(), 5);
    assert_eq!(files_in(&ta, "json").iter().filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("report-")).count(), 5);
    assert!(ta.join("schema.json").exists());
    for f in files_in(&ta, "csv").into_iter().chain(files_in(&ta, "json")) {
        let other = b.join("rollout/causal_nope").join(f.file_name().unwrap());
        assert_eq!(fs::read(&f).unwrap(), fs::read(other).unwrap(), "{}", f.display());
    }
}

#[test]
fn verify_default_has_nine_verdicts() {
    let dir = scratch("verify");
    let o = posbias(&["verify", "--out", s(&dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let verdicts: Vec<_> = files_in(&dir.join("verify"), "json").into_iter().filter(|p| !p.ends_with("summary.json")).collect();
    assert_eq!(verdicts.len(), 9);
}

#[test]
fn injected_fault_exits_three_naming_the_suite() {
    let dir = scratch("fault");
    let o = posbias(&["verify", "--suite", "decay-envelope", "--inject-fault", "decay-envelope", "--out", s(&dir)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("decay-envelope"), "{}", stderr(&o));
    assert!(stderr(&o).contains("(i,j)="), "{}", stderr(&o));
}

#[test]
fn critical_point_grid_reports_each_adjacent_pair() {
    let dir = scratch("crit");
    let o = posbias(&["verify", "--suite", "critical-points", "--grid-t", "2,4,8,16,32", "--out", s(&dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("verify/critical-points.json")).unwrap()).unwrap();
    let pairs = v["details"]["decay"]["pairs"].as_array().unwrap();
    // 3 values of m x 4 adjacent t-pairs plus 5 values of t x 2 adjacent m-pairs.
    assert_eq!(pairs.iter().filter(|p| p["axis"] == "t").count(), 12);
    assert!(pairs.iter().all(|p| p["ok"] == true));
}

#[test]
fn divergence_exits_two() {
    let dir = scratch("diverge");
    let cfg = dir.join("c.toml");
    fs::write(&cfg, format!("precision = \"f32\"\n{TINY_DATA}[model]\ndim = 8\nl_labels = 4\nhidden = 8\n[train]\niterations = 50\nbatch = 4\n[train.optimizer]\nlr = 1e30\n")).unwrap();
    let o = posbias(&["train", "--config", s(&cfg), "--out", s(&dir.join("out"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("iteration") || stderr(&o).contains("layer"), "{}", stderr(&o));
}

/// Runs `args` with `cfg`, then again with the echoed config; the echoes
/// and every listed artifact must match byte for byte.
fn echo_round_trip(name: &str, args: &[&str], cfg: &str, artifacts: &[&str]) {
    let dir = scratch(name);
    let path = dir.join("c.toml");
    fs::write(&path, cfg).unwrap();
    let (a, b) = (dir.join("a"), dir.join("b"));
    let run = |config: &Path, out: &Path| {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--config", s(config), "--out", s(out)]);
        let o = posbias(&full);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    };
    run(&path, &a);
    run(&a.join("resolved.toml"), &b);
    for f in std::iter::once("resolved.toml").chain(artifacts.iter().copied()) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{name}: {f}");
    }
}

#[test]
fn echoed_configs_reproduce_their_runs() {
    echo_round_trip("echo-rollout", &["rollout"], "masks = [\"prefix:k=2\"]\npes = [\"rope\"]\nn = 6\ndepth = 4\nseeds = 2\n", &["rollout/prefix-k-2_rope-base-10000/trace-1.csv"]);
    echo_round_trip("echo-verify", &["verify"], "suites = [\"aggregate-decay\"]\n[settings]\nseeds = 2\n", &["verify/aggregate-decay.json"]);
    echo_round_trip("echo-datagen", &["datagen"], &format!("set = \"probes\"\ncount = 3\n{TINY_DATA}"), &["probe-8.bin", "manifest.json"]);
    echo_round_trip(
        "echo-train",
        &["train", "--seed", "4"],
        &format!("{TINY_DATA}[model]\ndim = 8\nl_labels = 4\nhidden = 8\n[train]\niterations = 20\nbatch = 4\nlog_every = 5\n"),
        &["params.bin"],
    );
    echo_round_trip(
        "echo-experiment",
        &["experiment"],
        &format!(
            "name = \"t\"\nseeds = [1, 2]\n[grid]\nmasks = [\"causal\", \"window:w=3\"]\n{TINY_DATA}[model]\nhidden = 8\n[train]\niterations = 10\nbatch = 4\n[eval]\npairs = 20\nprobes = 5\nsinks = 5\n"
        ),
        &["gaps.csv", "positions.csv", "sinks.csv"],
    );
}

#[test]
fn train_then_eval_and_sinks_on_the_checkpoint() {
    let dir = scratch("pipeline");
    let cfg = dir.join("t.toml");
    fs::write(&cfg, format!("{TINY_DATA}[model]\ndim = 8\nl_labels = 4\nhidden = 8\n[train]\niterations = 30\nbatch = 8\nlog_every = 10\n")).unwrap();
    let t = dir.join("train");
    assert!(posbias(&["train", "--config", s(&cfg), "--out", s(&t)]).status.success());
    let log = fs::read_to_string(t.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("iteration,loss,wall_s"));
    assert_eq!(log.lines().count(), 4);
    let schema: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.join("schema.json")).unwrap()).unwrap();
    assert_eq!(schema["schema"], 1);
    assert_eq!(schema["files"]["train_log.csv"], serde_json::json!(["iteration", "loss", "wall_s"]));

    let ckpt = t.join("params.json");
    let ev = dir.join("eval.toml");
    fs::write(&ev, "[eval]\npairs = 50\nprobes = 5\nsinks = 10\n").unwrap();
    let e = dir.join("eval");
    let o = posbias(&["eval", "--config", s(&ev), "--checkpoint", s(&ckpt), "--out", s(&e)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(e.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["pairs"].as_array().unwrap().len(), 3);
    assert_eq!(report["position_curve"].as_array().unwrap().len(), 8);
    assert!(fs::read_to_string(e.join("eval.csv")).unwrap().starts_with("test_set,accuracy,gap\n"));

    let sk = dir.join("sinks");
    assert!(posbias(&["sinks", "--checkpoint", s(&ckpt), "--out", s(&sk)]).status.success());
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(sk.join("sinks.json")).unwrap()).unwrap();
    assert_eq!(rep["scores"].as_array().unwrap().len(), 17);
}

#[test]
fn experiment_resume_reuses_finished_runs() {
    let dir = scratch("resume");
    let cfg = dir.join("e.toml");
    fs::write(&cfg, format!("name = \"r\"\nseeds = [0]\n{TINY_DATA}[model]\nhidden = 8\n[train]\niterations = 10\nbatch = 4\n[eval]\npairs = 10\nprobes = 0\nsinks = 0\n")).unwrap();
    let out = dir.join("out");
    assert!(posbias(&["experiment", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let o = posbias(&["experiment", "--config", s(&cfg), "--out", s(&out), "--resume"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("reusing result"), "{}", stderr(&o));
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert!(runs.starts_with("mask,pe,depth,residual,bias,seed,status"));
    assert!(runs.contains(",0,ok,"));
    let schema: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("schema.json")).unwrap()).unwrap();
    for f in ["runs.csv", "gaps.csv", "positions.csv", "sinks.csv"] {
        assert!(schema["files"][f].is_array(), "{f}");
    }
    assert!(out.join("runs/causal_nope_d2_nores_uniform/seed-0/schema.json").exists());
}
