use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_rcm");

const INSTANCE_A: &str = "1,1,0\n1,2,1\n-1,-1,0\n-1,-2,1\n";
const OVERLAP_1D: &str = "1,3\n1,-1\n-1,-3\n-1,1\n";
const SYMMETRIC: &str = "1,2,0\n1,0,0\n1,1,1\n1,1,-1\n-1,-2,0\n-1,0,0\n-1,-1,1\n-1,-1,-1\n";

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn rcm(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (flag, p) in paths {
        cmd.arg(flag).arg(p);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn model_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn train_instance_a() {
    let dir = tempfile::tempdir().unwrap();
    let data = file(&dir, "a.csv", INSTANCE_A);
    let model = dir.path().join("m.json");
    let o = rcm(&["train", "--family", "ch"], &[("--data", &data), ("--out", &model)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("family=ch "));
    let m = model_json(&model);
    assert_eq!(m["w"], serde_json::json!([1.0, 0.0]));
    assert_eq!(m["b"], 0.0);
    assert_eq!(m["d"], 2);
    assert_eq!(m["regime"], "strictly_separated");
}

#[test]
fn train_rch_overlapping() {
    let dir = tempfile::tempdir().unwrap();
    let data = file(&dir, "o.csv", OVERLAP_1D);
    let model = dir.path().join("m.json");
    let trace = dir.path().join("t.json");
    let o = rcm(
        &["train", "--family", "rch", "--param", "0.5"],
        &[("--data", &data), ("--out", &model), ("--trace", &trace)],
    );
    assert!(o.status.success());
    let m = model_json(&model);
    assert_eq!(m["regime"], "overlapping");
    assert!((m["g_value"].as_f64().unwrap() + 2.0).abs() < 1e-12);
    assert_eq!(m["param"], 0.5);
    let t: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert!(!t.as_array().unwrap().is_empty());
}

#[test]
fn infeasible_rch_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = file(&dir, "b.csv", "1,1\n1,2\n1,3\n-1,-1\n-1,-2\n-1,-3\n");
    let model = dir.path().join("m.json");
    let o = rcm(
        &["train", "--family", "rch", "--param", "1.01"],
        &[("--data", &data), ("--out", &model)],
    );
    assert_eq!(o.status.code(), Some(6));
    assert!(!model.exists());
    let o = rcm(
        &["train", "--family", "rch", "--param", "1.0"],
        &[("--data", &data), ("--out", &model)],
    );
    assert!(o.status.success());
}

#[test]
fn predict_reproduces_labels() {
    let dir = tempfile::tempdir().unwrap();
    let data = file(&dir, "a.csv", INSTANCE_A);
    let model = dir.path().join("m.json");
    assert!(rcm(&["train", "--family", "ch"], &[("--data", &data), ("--out", &model)])
        .status
        .success());
    let o = rcm(&["predict"], &[("--model", &model), ("--data", &data)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "1\n1\n-1\n-1\n");

    let unlabeled = file(&dir, "u.csv", "3,0\n-0.5,7\n");
    let out = dir.path().join("p.csv");
    let o = rcm(
        &["predict"],
        &[("--model", &model), ("--data", &unlabeled), ("--out", &out)],
    );
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "1\n-1\n");
    assert_eq!(stdout(&o), "predicted=2\n");
}

#[test]
fn predict_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let data = file(&dir, "a.csv", INSTANCE_A);
    let model = dir.path().join("m.json");
    rcm(&["train", "--family", "ch"], &[("--data", &data), ("--out", &model)]);
    let wide = file(&dir, "w.csv", "1,2,3,4\n");
    let o = rcm(&["predict"], &[("--model", &model), ("--data", &wide)]);
    assert_eq!(o.status.code(), Some(7));
}

#[test]
fn eta_max_symmetric_ellipsoid() {
    let dir = tempfile::tempdir().unwrap();
    let data = file(&dir, "s.csv", SYMMETRIC);
    let o = rcm(&["eta-max", "--family", "ellipsoid"], &[("--data", &data)]);
    assert!(o.status.success());
    let text = stdout(&o);
    let kappa: f64 = text.trim().strip_prefix("kappa_max=").unwrap().parse().unwrap();
    // Class means (±1, 0) with covariance I/2 per class.
    assert!((kappa - 2f64.sqrt()).abs() < 1e-4, "{text}");

    // Unit covariance: deviations of ±sqrt(2) along each axis.
    let r = 2f64.sqrt();
    let mut unit = String::new();
    for (label, c) in [(1, 1.0), (-1, -1.0)] {
        for (dx, dy) in [(r, 0.0), (-r, 0.0), (0.0, r), (0.0, -r)] {
            unit.push_str(&format!("{label},{},{dy}\n", c + dx));
        }
    }
    let o = rcm(&["eta-max", "--family", "ellipsoid"], &[("--data", &file(&dir, "i.csv", &unit))]);
    let kappa: f64 = stdout(&o).trim().strip_prefix("kappa_max=").unwrap().parse().unwrap();
    assert!((kappa - 1.0).abs() < 1e-4);

    let o = rcm(&["eta-max", "--family", "rch"], &[("--data", &file(&dir, "o.csv", OVERLAP_1D))]);
    let nu: f64 = stdout(&o).trim().strip_prefix("nu_min=").unwrap().parse().unwrap();
    assert!((nu - 2.0 / 3.0).abs() < 1e-6);
}

#[test]
fn sweep_rows_non_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let data = file(&dir, "s.csv", SYMMETRIC);
    for family in ["ellipsoid", "fda", "rch"] {
        let o = rcm(&["sweep", "--family", family, "--grid", "11"], &[("--data", &data)]);
        assert!(o.status.success());
        let text = stdout(&o);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("eta,"));
        let values: Vec<f64> = lines
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(values.len(), 11);
        assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-6), "{family}: {values:?}");
    }
}

#[test]
fn ingest_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("ragged.csv", "1,1,0,2\n-1,0,0,1\n1,3,4\n", 4, "line 3"),
        ("label.csv", "1,0\n2,1\n", 4, "line 2"),
        ("empty.csv", "1,0\n1,1\n", 5, ""),
    ];
    for (name, text, code, needle) in cases {
        let data = file(&dir, name, text);
        let o = rcm(&["train", "--family", "ch"], &[("--data", &data)]);
        assert_eq!(o.status.code(), Some(code), "{name}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{name}: {err}");
    }
    let o = rcm(
        &["train", "--family", "ch"],
        &[("--data", &dir.path().join("missing.csv"))],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bad_usage() {
    let o = rcm(&["train", "--family", "svm"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_training_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = file(&dir, "s.csv", SYMMETRIC);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = rcm(
            &["train", "--family", "ellipsoid", "--param", "3", "--init", "random", "--seed", "11"],
            &[("--data", &data), ("--out", out)],
        );
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
