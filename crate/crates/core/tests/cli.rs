//! End-to-end runs of the `ncfir` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ncfir::lti::LaurentBlock;

fn ncfir(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncfir")).args(args).current_dir(cwd).output().unwrap()
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn version_reports_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncfir(&["--version"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("(schema 1)"));
}

#[test]
fn open_loop_iv_equals_ls() {
    let dir = tempfile::tempdir().unwrap();
    let sim = ncfir(
        &["simulate", "--plant", "stable_siso", "--controller", "zero", "--length", "600", "--sigma-w", "0.3", "--sigma-v", "0.1", "--seed", "9", "--out", "t.csv"],
        dir.path(),
    );
    assert!(sim.status.success(), "{}", stderr(&sim));
    for mode in ["iv", "ls"] {
        let out = ncfir(&["identify", "t.csv", "--mode", mode, "--r", "6", "--d", "3", "--out-dir", mode], dir.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let read = |m: &str| LaurentBlock::read_csv(std::fs::File::open(dir.path().join(m).join("estimate.csv")).unwrap()).unwrap();
    let (iv, ls) = (read("iv").theta(), read("ls").theta());
    assert!((iv - ls).amax() <= 1e-10);
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("iv/diagnostics.json")).unwrap()).unwrap();
    assert!(diag["lambda_iv"].as_f64().unwrap() > 0.5);
}

#[test]
fn simulate_identify_realize_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let out = ncfir(args, dir.path());
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
        out
    };
    run(&["simulate", "--plant", "example4", "--length", "1500", "--sigma-v", "0.05", "--truth", "--seed", "1", "--out", "t.csv"]);
    run(&["identify", "t.csv", "--mode", "riv", "--r", "8", "--d", "12", "--sigma-c", "1", "--out-dir", "riv"]);
    run(&["realize", "riv/estimate.csv", "--order-s", "1", "--order-u", "2", "--points", "32", "--out-dir", "model"]);
    assert!(dir.path().join("model/model.json").exists());
    let freq = std::fs::read_to_string(dir.path().join("model/freq.csv")).unwrap();
    assert_eq!(freq.lines().count(), 33);
    let out = run(&["diagnose", "t.csv", "--r", "8", "--d", "12", "--plant", "example4", "--controller", "lqr"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((doc["t_infinity"].as_f64().unwrap() - 6.05).abs() < 0.01);
    assert!(doc["triangularity_residual"].as_f64().is_some());
}

#[test]
fn experiment_writes_every_controller() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("example4.toml");
    let out = ncfir(
        &["experiment", cfg.to_str().unwrap(), "--trials", "2", "--set", "n_grid=[50,100,200]", "--out-dir", "res"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(dir.path().join("res/results.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 8 * 3 * 2);
    let plots = std::fs::read_dir(dir.path().join("res/plotdata")).unwrap().count();
    assert_eq!(plots, 8);
    assert!(dir.path().join("res/diagnostics.json").exists());
}

#[test]
fn bound_rejects_confidence_outside_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("bound.toml");
    let ok = ncfir(&["bound", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(ok.status.success(), "{}", stderr(&ok));
    let bad = ncfir(&["bound", "--config", cfg.to_str().unwrap(), "--set", "delta=2"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    let msg = stderr(&bad);
    assert!(msg.starts_with("bound:") && msg.contains("(0, 1)"), "{msg}");
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = ncfir(&["identify", "nope.csv", "--mode", "ls", "--r", "2", "--d", "2"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "plant = \"example4\"\nbogus = 1\n").unwrap();
    let unknown = ncfir(&["experiment", "bad.toml"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("bogus"));
    assert_eq!(ncfir(&["frobnicate"], dir.path()).status.code(), Some(2));
}
