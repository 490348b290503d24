use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use memheat_cli::commands::{sweep_cell, sweep_cells, sweep_line, SWEEP_HEADER};
use memheat_cli::config::parse_config;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_memheat"))
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

const BLOWUP: &str = r#"{
    "exponents": { "p": 2, "q": 2 },
    "c": { "family": "constant", "amplitude": 1 },
    "k": { "family": "constant", "amplitude": 0 },
    "initial": { "family": "constant", "value": 1 },
    "solver": { "t_max": 2 },
    "output": { "snapshot_every": 0.25 }
}"#;

#[test]
fn run_writes_trace_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BLOWUP);
    let out = dir.path().join("out");
    let res = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("OUTCOME: status=BlowUp"), "{stdout}");
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,sup_norm,mass_w,M_left,M_right,dt\n"));
    let snap = fs::read_to_string(out.join("snap_000000.csv")).unwrap();
    assert!(snap.starts_with("x,u\n"));
    assert_eq!(snap.lines().count(), 202);
    assert!(out.join("snap_000003.csv").exists());
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BLOWUP);
    let mut traces = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let res = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert!(res.status.success());
        traces.push((fs::read(out.join("trace.csv")).unwrap(), fs::read(out.join("snap_000002.csv")).unwrap()));
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn step_budget_aborts_with_status_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = BLOWUP.replace(r#""t_max": 2"#, r#""t_max": 2, "max_steps": 10"#);
    let cfg = write_config(dir.path(), &text);
    let res = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8(res.stdout).unwrap().contains("status=Aborted"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BLOWUP.replace(r#""p": 2"#, r#""p": -1"#));
    let res = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8(res.stderr).unwrap().contains("exponents.p must be > 0"));

    let cfg = write_config(dir.path(), BLOWUP);
    let res = bin().args(["oracle", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn classify_reports_reaction_blowup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BLOWUP);
    let res = bin().args(["classify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert_eq!(stdout.lines().next(), Some("VERDICT: BlowUpAll via reaction-blowup"));
}

#[test]
fn verify_sublinear_passes() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "exponents": { "p": 0.5, "q": 0.5 },
        "c": { "family": "constant", "amplitude": 1 },
        "k": { "family": "constant", "amplitude": 1 },
        "initial": { "family": "cos_bump", "value": 1 },
        "domain": { "nodes": 51 },
        "solver": { "t_max": 2 }
    }"#;
    let cfg = write_config(dir.path(), text);
    let res = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert_eq!(res.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("RESIDUAL: domination"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn verify_fails_without_construction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BLOWUP);
    let res = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn transform_verification() {
    let res = bin().args(["verify", "--transform", "--config"]).arg(config_path("transform.json")).output().unwrap();
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert_eq!(res.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("RESIDUAL: transform discrepancy="));
}

#[test]
fn oracle_reports_blowup() {
    let res = bin().args(["oracle", "--config"]).arg(config_path("oracle.json")).output().unwrap();
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.starts_with("OUTCOME: BlowUp r_star=2.449"), "{stdout}");
    assert!(stdout.contains("VERDICT: applies = true"));
}

#[test]
fn sweep_rows_match_single_runs() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "exponents": { "p": 2, "q": 2 },
        "c": { "family": "constant", "amplitude": 1 },
        "k": { "family": "constant", "amplitude": 0 },
        "initial": { "family": "constant", "value": 0.05 },
        "domain": { "nodes": 41 },
        "solver": { "t_max": 5 },
        "sweep": {
            "p": [1, 2],
            "k": [ { "family": "constant", "amplitude": 0 }, { "family": "power", "amplitude": 1, "gamma": 3 } ]
        }
    }"#;
    let cfg_path = write_config(dir.path(), text);
    let out = dir.path().join("sweep");
    let res = bin().args(["sweep", "--config"]).arg(&cfg_path).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(SWEEP_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(out.join("cell_0003").join("trace.csv").exists());

    let config = parse_config(text).unwrap();
    let cells = sweep_cells(&config, &config.scenario());
    for (cell, row) in cells.iter().zip(&rows) {
        let (regime, outcome) = sweep_cell(cell).unwrap();
        assert_eq!(&sweep_line(cell, regime, &outcome), row);
    }
}
