use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SCHLOEGL_CLOSED: &str = "# closed Schloegl\n2 X <=> 3 X @ 1, 1\n";
const BISTABLE: &str = "0 <=> X @ 0.06, 0.292\n2 X <=> 3 X @ 0.25, 0.020833333333333332\n";
const IRREVERSIBLE: &str = "A -> B @ 1\n";
const ISOMER: &str = "A <=> B @ 2, 1\n";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kinetica"));
    c.env_remove("KINETICA_SEED");
    c
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema(artifact: &Path, schema: &str) {
    let schema = json(&schema_dir().join(format!("{schema}.schema.json")));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let doc = json(artifact);
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{}: {errors:?}", artifact.display());
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn validate_names_the_schloegl_case() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "net.txt", SCHLOEGL_CLOSED);
    let o = run(&["validate", "--network", "net.txt", "--out", "out"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&tmp.path().join("out/validate.json"));
    assert_eq!(report["schloegl"]["case"], "closed");
    assert_eq!(report["schloegl"]["witness"], 1.0);
    assert_schema(&tmp.path().join("out/validate.json"), "validate");
    assert_schema(&tmp.path().join("out/manifest.json"), "manifest");
    // nothing but the output directory and the input were created
    let mut entries: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    entries.sort();
    assert_eq!(entries, ["net.txt", "out"]);
}

#[test]
fn analyze_flags_irreversible_networks() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "ab.txt", IRREVERSIBLE);
    let o = run(&["analyze", "--network", "ab.txt", "--out", "out"], tmp.path());
    assert_eq!(code(&o), 2);
    let report = json(&tmp.path().join("out/analysis.json"));
    assert_eq!(report["reversible"], false);
    assert!(!report["reversible_measure"]["residuals"].as_array().unwrap().is_empty());
    assert_schema(&tmp.path().join("out/analysis.json"), "analysis");

    write(tmp.path(), "iso.txt", ISOMER);
    let o = run(&["analyze", "--network", "iso.txt", "--out", "rev"], tmp.path());
    assert_eq!(code(&o), 0);
    assert_schema(&tmp.path().join("rev/analysis.json"), "analysis");
}

#[test]
fn simulate_is_byte_identical_across_reruns_and_workers() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "net.txt", BISTABLE);
    let base = ["simulate", "--network", "net.txt", "--seed", "7", "--M", "50", "--t-end", "5", "--replicas", "6"];
    let mut snaps = Vec::new();
    for (out, workers) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let mut args = base.to_vec();
        args.extend(["--out", out, "--workers", workers]);
        let o = run(&args, tmp.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        snaps.push(dir_snapshot(&tmp.path().join(out)));
    }
    assert_eq!(snaps[0], snaps[1]);
    assert_eq!(snaps[0], snaps[2]);
    assert!(snaps[0].iter().any(|(n, _)| n == "replica_0005.csv"));
    assert_schema(&tmp.path().join("a/ensemble.json"), "ensemble");
    assert_schema(&tmp.path().join("a/manifest.json"), "manifest");
}

#[test]
fn seed_sources_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "net.txt", ISOMER);
    let o = bin()
        .args(["simulate", "--network", "net.txt", "--out", "env", "--t-end", "1"])
        .env("KINETICA_SEED", "99")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let m = json(&tmp.path().join("env/manifest.json"));
    assert_eq!(m["seed"], 99);
    assert_eq!(m["seed_source"], "environment");

    let o = run(&["simulate", "--network", "net.txt", "--out", "ent", "--t-end", "1"], tmp.path());
    assert_eq!(code(&o), 0);
    let m = json(&tmp.path().join("ent/manifest.json"));
    assert_eq!(m["seed_source"], "entropy");
    assert!(m["seed"].is_u64());
}

#[test]
fn flags_override_the_overlay() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "net.txt", ISOMER);
    write(
        tmp.path(),
        "cfg.json",
        r#"{"M": 20, "t_end": 1, "replicas": 5, "seed": 3, "c0": [1.0, 0.5]}"#,
    );
    let o = run(
        &["simulate", "--network", "net.txt", "--config", "cfg.json", "--replicas", "2", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    let m = json(&tmp.path().join("o/manifest.json"));
    assert_eq!(m["settings"]["replicas"], 2);
    assert_eq!(m["settings"]["M"], 20.0);
    assert_eq!(m["seed_source"], "config");
    let ens = json(&tmp.path().join("o/ensemble.json"));
    assert_eq!(ens["initial_law"]["counts"], serde_json::json!([20, 10]));
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "net.txt", ISOMER);
    write(tmp.path(), "bad.txt", "A -> @ 1\n");
    write(tmp.path(), "cfg.json", r#"{"unknown_key": 1}"#);
    for args in [
        vec!["validate", "--network", "net.txt", "--frobnicate"],
        vec!["frobnicate"],
        vec!["validate", "--network", "missing.txt"],
        vec!["validate", "--network", "bad.txt"],
        vec!["simulate", "--network", "net.txt", "--config", "cfg.json"],
        vec!["simulate", "--network", "net.txt", "--M", "-1"],
    ] {
        let o = run(&args, tmp.path());
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn fixed_points_of_the_bistable_schloegl_model() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "net.txt", BISTABLE);
    let o = run(&["fixed-points", "--network", "net.txt", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0);
    let r = json(&tmp.path().join("o/fixed_points.json"));
    let kinds: Vec<&str> = r["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["stability"].as_str().unwrap())
        .collect();
    assert_eq!(kinds.iter().filter(|k| **k == "stable").count(), 2, "{kinds:?}");
    assert_eq!(kinds.iter().filter(|k| **k == "unstable").count(), 1, "{kinds:?}");
    assert_schema(&tmp.path().join("o/fixed_points.json"), "fixed_points");
}

#[test]
fn fluctuations_report_and_empirical_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "net.txt", ISOMER);
    let o = run(
        &["fluctuations", "--network", "net.txt", "--out", "o", "--seed", "5", "--replicas", "16", "--M", "100"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("o/fluctuations.json"));
    assert_eq!(r["onsager"]["verdict"], "symmetric");
    assert!(r["kubo"]["residual"].as_f64().unwrap() < 1e-6);
    assert!(tmp.path().join("o/empirical_covariance.csv").exists());
    assert_schema(&tmp.path().join("o/fluctuations.json"), "fluctuations");

    write(tmp.path(), "cycle.txt", "A -> B @ 1\nB -> C @ 1\nC -> A @ 1\nA -> C @ 0.1\n");
    write(tmp.path(), "c.json", r#"{"c_bar": [1.0, 1.0, 1.0]}"#);
    let o = run(
        &["fluctuations", "--network", "cycle.txt", "--config", "c.json", "--out", "cyc"],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
}

const LATTICE: &str = r#"{
  "lattice": {"dimension": 1, "extent": [30], "epsilon": 0.1, "scaling": "euler",
              "jump_rates": [[{"plus": 0.5, "minus": 0.0}], [{"plus": 0.5, "minus": 0.0}]]},
  "profiles": [{"kind": "sine", "mean": 1.0, "amplitude": 0.5, "period": 3.0},
               {"kind": "constant", "value": 0.5}],
  "tau_grid": [0.0, 0.5, 1.0],
  "replicas": 3,
  "pde_cells": [300]
}"#;

#[test]
fn lattice_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "net.txt", "A <=> B @ 1, 1\n");
    write(tmp.path(), "lat.json", LATTICE);
    let mut snaps = Vec::new();
    for (out, w) in [("a", "1"), ("b", "3")] {
        let o = run(
            &["lattice", "--network", "net.txt", "--config", "lat.json", "--seed", "11", "--out", out, "--workers", w],
            tmp.path(),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        snaps.push(dir_snapshot(&tmp.path().join(out)));
    }
    assert_eq!(snaps[0], snaps[1]);
    let pde = fs::read_to_string(tmp.path().join("a/pde.csv")).unwrap();
    assert!(pde.starts_with("tau,X,species,value\n"));
    assert_eq!(pde.lines().count(), 1 + 3 * 300 * 2);
    assert_schema(&tmp.path().join("a/lattice_runs.json"), "lattice_runs");
    assert_schema(&tmp.path().join("a/manifest.json"), "manifest");
}

#[test]
fn convergence_tables() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "net.txt", ISOMER);
    let o = run(
        &["convergence", "--network", "net.txt", "--out", "mf", "--seed", "2", "--M", "20,2000", "--replicas", "32", "--t-end", "2"],
        tmp.path(),
    );
    assert!(matches!(code(&o), 0 | 2));
    assert_schema(&tmp.path().join("mf/convergence.json"), "convergence");
    let csv = fs::read_to_string(tmp.path().join("mf/convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    write(tmp.path(), "lat.json", r#"{
      "kind": "scaling",
      "lattice": {"dimension": 1, "extent": [1], "epsilon": 0.1, "scaling": "euler",
                  "jump_rates": [[{"plus": 0.5, "minus": 0.0}], [{"plus": 0.5, "minus": 0.0}]]},
      "profiles": [{"kind": "sine", "mean": 1.0, "amplitude": 0.5, "period": 2.0},
                   {"kind": "constant", "value": 1.0}],
      "macro_length": [2.0], "tau_grid": [1.0], "replicas": 8, "pde_cells_per_unit": 100
    }"#);
    let o = run(
        &["convergence", "--network", "net.txt", "--config", "lat.json", "--epsilon-list", "0.2,0.1", "--out", "sc", "--seed", "1"],
        tmp.path(),
    );
    assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_schema(&tmp.path().join("sc/convergence.json"), "convergence");
}
