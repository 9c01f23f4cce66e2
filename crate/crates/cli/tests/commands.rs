use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hpcfe_core::bench::{pedagogical_high, pedagogical_low};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn hpcfe(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpcfe"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = hpcfe(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    hpcfe(args, cwd).status.code().expect("exit code")
}

/// Two-level pedagogical data: 21 low points on a grid, every fourth one
/// repeated at the high level.
fn write_training_data(dir: &Path) -> (PathBuf, Vec<(f64, f64)>) {
    let mut s = String::from("x1,y,level\n");
    let mut high = Vec::new();
    for i in 0..=20 {
        let x = i as f64 / 20.0;
        s += &format!("{x},{},1\n", pedagogical_low(x));
        if i % 4 == 0 {
            high.push((x, pedagogical_high(x)));
        }
    }
    for (x, y) in &high {
        s += &format!("{x},{y},2\n");
    }
    let p = dir.join("train.csv");
    fs::write(&p, s).unwrap();
    (p, high)
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rd = csv::Reader::from_path(p).unwrap();
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

/// Artifact paths are relative to the manifest.
fn check_manifest(manifest: &Path) {
    let dir = manifest.parent().unwrap();
    let m: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    let arts = m["artifacts"].as_array().unwrap();
    assert!(!arts.is_empty());
    for a in arts {
        let bytes = fs::read(dir.join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn fit_then_predict_reproduces_training_points() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (_, high) = write_training_data(d);
    ok(&["fit", "--data", "train.csv", "--out", "model.json", "--nugget", "1e-10"], d);
    let mut q = String::from("x1,label\n");
    for (x, _) in &high {
        q += &format!("{x},a\n");
    }
    fs::write(d.join("query.csv"), q).unwrap();
    ok(&["predict", "--model", "model.json", "--query", "query.csv", "--out", "pred.csv"], d);

    let (header, rows) = read_csv(&d.join("pred.csv"));
    assert_eq!(header, ["x1", "mean", "variance"]);
    for ((_, y), row) in high.iter().zip(&rows) {
        let mean: f64 = row[1].parse().unwrap();
        let var: f64 = row[2].parse().unwrap();
        assert!((mean - y).abs() <= 1e-6 * y.abs().max(1.0), "{mean} vs {y}");
        assert!(var >= 0.0);
    }
    check_manifest(&d.join("model.json.manifest.json"));
    check_manifest(&d.join("pred.csv.manifest.json"));
}

#[test]
fn predict_rejects_wrong_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_training_data(d);
    ok(&["fit", "--data", "train.csv", "--out", "model.json"], d);
    fs::write(d.join("q.csv"), "x1,x2\n0.1,0.2\n").unwrap();
    assert_eq!(code(&["predict", "--model", "model.json", "--query", "q.csv", "--out", "p.csv"], d), 1);
    assert!(!d.join("p.csv").exists());
}

#[test]
fn uq_run_writes_scores_and_densities() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["uq", "run", "--bench", "pedagogical", "--seed", "3", "--mcs", "300", "--out-dir", "out"], d);
    let (header, rows) = read_csv(&d.join("out/scores.csv"));
    assert_eq!(header, ["model", "rmse", "ks_distance", "mean_abs_error"]);
    let models: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(models, ["mf", "lf_only", "hf_only"]);
    let (header, _) = read_csv(&d.join("out/densities.csv"));
    assert_eq!(header[0], "x");
    assert_eq!(header[1], "truth");
    check_manifest(&d.join("out/manifest.json"));

    ok(&["plot-data", "--report", "out/study.json", "--out", "tidy.csv"], d);
    let (header, rows) = read_csv(&d.join("tidy.csv"));
    assert_eq!(header, ["series", "x", "value"]);
    assert!(rows.iter().any(|r| r[0] == "density_mf"));
}

#[test]
fn twin_mass_time_tracking_beats_single_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["twin", "simulate", "--quantity", "mass", "--domain", "time", "--hf", "19", "--out-dir", "sim"], d);
    ok(
        &[
            "twin", "track", "--measurements", "sim/measurements.csv",
            "--scenario", "sim/scenario.json", "--out-dir", "trk",
        ],
        d,
    );
    let r: Value = serde_json::from_str(&fs::read_to_string(d.join("trk/report.json")).unwrap()).unwrap();
    let mf = r["mf_rmse"].as_f64().unwrap();
    let sf = r["sf_rmse"].as_f64().unwrap();
    assert!(mf < sf && mf <= 0.02, "mf {mf}, sf {sf}");
    let (header, rows) = read_csv(&d.join("trk/evolution.csv"));
    assert_eq!(header, ["t_s", "mean", "variance", "single_mean", "truth"]);
    assert_eq!(rows.len(), 501);
    check_manifest(&d.join("trk/manifest.json"));

    ok(&["plot-data", "--report", "trk/report.json", "--out", "tidy.csv"], d);
    let (_, rows) = read_csv(&d.join("tidy.csv"));
    assert_eq!(rows.len(), 4 * 501);
}

#[test]
fn track_without_scenario_uses_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        &[
            "twin", "simulate", "--quantity", "stiffness", "--domain", "frequency",
            "--hf", "10", "--lf", "101", "--out-dir", "sim",
        ],
        d,
    );
    ok(
        &[
            "twin", "track", "--measurements", "sim/measurements.csv", "--quantity", "stiffness",
            "--query-points", "50", "--alert", "0.1", "--out-dir", "trk",
        ],
        d,
    );
    let r: Value = serde_json::from_str(&fs::read_to_string(d.join("trk/report.json")).unwrap()).unwrap();
    assert_eq!(r["t_s"].as_array().unwrap().len(), 50);
    assert!(r.get("mf_rmse").is_none_or(Value::is_null));
    assert!(!r["alerts"].as_array().unwrap().is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_training_data(d);
    fs::write(d.join("q.csv"), "x1\n0.13\n0.77\n").unwrap();
    for run in ["a", "b"] {
        let o = |f: &str| format!("{run}/{f}");
        fs::create_dir_all(d.join(run)).unwrap();
        ok(&["uq", "run", "--bench", "pedagogical", "--seed", "7", "--out-dir", run], d);
        ok(&["fit", "--data", "train.csv", "--out", &o("model.json")], d);
        ok(&["predict", "--model", &o("model.json"), "--query", "q.csv", "--out", &o("pred.csv")], d);
        ok(
            &[
                "twin", "simulate", "--quantity", "mass", "--domain", "frequency", "--hf", "12",
                "--noise", "0.01", "--seed", "5", "--out-dir", &o("sim"),
            ],
            d,
        );
        ok(
            &[
                "twin", "track", "--measurements", &o("sim/measurements.csv"),
                "--scenario", &o("sim/scenario.json"), "--out-dir", &o("trk"),
            ],
            d,
        );
        ok(&["plot-data", "--report", &o("trk/report.json"), "--out", &o("tidy.csv")], d);
    }
    for f in [
        "scores.csv", "densities.csv", "study.json", "model.json", "pred.csv",
        "sim/measurements.csv", "sim/scenario.json", "trk/report.json", "trk/evolution.csv",
        "tidy.csv",
    ] {
        let a = fs::read(d.join("a").join(f)).unwrap();
        let b = fs::read(d.join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&["--help"], d), 0);
    assert_eq!(code(&["fit", "--bogus"], d), 1);
    assert_eq!(code(&["fit", "--data", "missing.csv", "--out", "m.json"], d), 1);
    assert_eq!(code(&["uq", "run", "--out-dir", "u"], d), 1);
    assert_eq!(code(&["uq", "run", "--bench", "pedagogical", "--design", "50,16,4"], d), 1);

    // duplicate inputs with no nugget leave the correlation matrix singular
    fs::write(d.join("dup.csv"), "x1,y,level\n0.1,1,1\n0.1,2,1\n0.5,0.3,1\n0.9,0.7,1\n").unwrap();
    assert_eq!(code(&["fit", "--data", "dup.csv", "--out", "m.json", "--nugget", "0"], d), 2);
    assert!(!d.join("m.json").exists());

    fs::write(d.join("other.json"), "{\"a\": 1}").unwrap();
    assert_eq!(code(&["plot-data", "--report", "other.json", "--out", "t.csv"], d), 1);
}
