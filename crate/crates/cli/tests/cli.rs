use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use riskcast_core::train::TrainError;
use riskcast_core::LinearModel;

const SMALL: &str = "days = 20\nk_neighbors = 50\nprofile_days = 2\nplot_points = 11\n";

fn riskcast(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskcast")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn manifest_paths(out: &Path, command: &str) -> Vec<String> {
    let text = std::fs::read_to_string(out.join(format!("manifest_{command}.json"))).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["outputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap().to_string()).collect()
}

fn load(out: &Path, name: &str) -> Result<(LinearModel, std::collections::BTreeMap<String, String>), TrainError> {
    LinearModel::load_csv(&out.join("models").join(name))
}

#[test]
fn train_writes_three_models_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("out");
    ok(&riskcast(&["train", "--config", cfg.to_str().unwrap()], &out));
    let paths = manifest_paths(&out, "train");
    assert_eq!(paths, ["models/proposed.csv", "models/qua_e.csv", "models/val_n.csv"]);
    for p in &paths {
        assert!(out.join(p).is_file(), "{p}");
    }
    let (_, meta) = load(&out, "proposed.csv").unwrap();
    assert_eq!(meta["beta"], "0.5");
    assert_eq!(meta["method"], "proposed");
}

#[test]
fn zero_beta_gives_val_n_objective() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("out");
    ok(&riskcast(&["train", "--config", cfg.to_str().unwrap(), "--beta", "0"], &out));
    let (prop, pm) = load(&out, "proposed.csv").unwrap();
    let (val, vm) = load(&out, "val_n.csv").unwrap();
    assert_eq!(pm["objective"], vm["objective"]);
    assert_eq!((prop.weights, prop.intercept), (val.weights, val.intercept));
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let missing_fleet = small_config(dir.path(), "fleet = \"nowhere.toml\"\n");
    let o = riskcast(&["train", "--config", missing_fleet.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config error"));

    let cfg = small_config(dir.path(), "");
    let c = cfg.to_str().unwrap();
    assert_eq!(riskcast(&["train", "--config", c, "--beta", "1.0"], &out).status.code(), Some(2));
    assert_eq!(riskcast(&["train", "--config", c, "--backend", "newton"], &out).status.code(), Some(2));

    let o = riskcast(&["evaluate", "--config", c], &dir.path().join("empty"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing artifact"));

    let bad_data = dir.path().join("bad.csv");
    std::fs::write(&bad_data, "day,slot,y_kw\n0,0,abc\n").unwrap();
    let cfg = small_config(dir.path(), "data = \"bad.csv\"\n");
    assert_eq!(riskcast(&["train", "--config", cfg.to_str().unwrap()], &out).status.code(), Some(3));

    // A single iteration leaves no earlier objective to measure progress against.
    let cfg = small_config(dir.path(), "subgradient_iterations = 1\n");
    let o = riskcast(&["train", "--config", cfg.to_str().unwrap(), "--backend", "subgrad"], &out);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn evaluate_rejects_a_model_trained_at_another_beta() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path(), "");
    let out = dir.path().join("out");
    ok(&riskcast(&["train", "--config", c.to_str().unwrap()], &out));
    let o = riskcast(&["evaluate", "--config", c.to_str().unwrap(), "--beta", "0.7"], &out);
    assert_eq!(o.status.code(), Some(2));
}

fn full_run(out: &Path, cfg: &Path) {
    let c = cfg.to_str().unwrap();
    ok(&riskcast(&["generate", "--config", c], out));
    ok(&riskcast(&["train", "--config", c], out));
    ok(&riskcast(&["evaluate", "--config", c, "--plot-surface", "--profile"], out));
    ok(&riskcast(&["sweep", "--config", c], out));
}

#[test]
fn pipeline_outputs_are_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "seed = 11\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    full_run(&a, &cfg);
    full_run(&b, &cfg);
    let mut files = Vec::new();
    for cmd in ["generate", "train", "evaluate", "sweep"] {
        files.extend(manifest_paths(&a, cmd));
    }
    for f in [
        "data/raw.csv",
        "data/train.csv",
        "data/test.csv",
        "fleet.toml",
        "metrics.csv",
        "traces.csv",
        "surface.csv",
        "surface_plot.csv",
        "profile.csv",
        "sweep.csv",
        "sweep_traces.csv",
    ] {
        assert!(files.iter().any(|p| p == f), "{f} not in any manifest");
    }
    for f in &files {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }

    let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    let methods: Vec<&str> = metrics.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["proposed", "qua_e", "val_n", "sto_opt"]);
    assert!(metrics.starts_with("method,rmse,avg_cost,avg_high_cost,beta,quantile,n,m_above,clamped,degenerate\n"));
    // One header plus 8 segments for the default fleet.
    assert_eq!(std::fs::read_to_string(a.join("surface.csv")).unwrap().lines().count(), 9);
    assert_eq!(std::fs::read_to_string(a.join("surface_plot.csv")).unwrap().lines().count(), 12);
    assert_eq!(std::fs::read_to_string(a.join("profile.csv")).unwrap().lines().count(), 1 + 2 * 24);
    assert_eq!(std::fs::read_to_string(a.join("sweep.csv")).unwrap().lines().count(), 4);
}

#[test]
fn metrics_are_recomputable_from_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("out");
    ok(&riskcast(&["train", "--config", cfg.to_str().unwrap()], &out));
    ok(&riskcast(&["evaluate", "--config", cfg.to_str().unwrap()], &out));
    let mut traces = csv::Reader::from_path(out.join("traces.csv")).unwrap();
    let mut costs: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for r in traces.records() {
        let r = r.unwrap();
        costs.entry(r[0].to_string()).or_default().push(r[6].parse().unwrap());
    }
    let mut metrics = csv::Reader::from_path(out.join("metrics.csv")).unwrap();
    for r in metrics.records() {
        let r = r.unwrap();
        let c = &costs[&r[0]];
        let report = riskcast_core::evaluation::summarize_costs(c, 0.5).unwrap();
        assert_eq!(report.avg_high_cost.to_string(), r[3]);
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        assert!((mean - r[2].parse::<f64>().unwrap()).abs() <= 1e-9 * mean);
    }
}
