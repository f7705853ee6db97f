mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::*;
use phasefit::workbench::write_experiments;

const DECANE_OIL: &str = r#"name = "decane oil"
source = "library constants"

[[component]]
name = "CH4"
fraction = 0.7

[[component]]
name = "nC10"
fraction = 0.3

[[component]]
name = "CO2"
fraction = 0.0
"#;

fn phasefit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasefit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("oil.toml"), DECANE_OIL).unwrap();
    fs::write(
        dir.path().join("binary.toml"),
        "name = \"binary\"\n\n[[component]]\nname = \"CH4\"\nfraction = 0.6\n\n[[component]]\nname = \"CO2\"\nfraction = 0.4\n",
    )
    .unwrap();
    dir
}

#[test]
fn kij_prints_matrix() {
    let dir = workspace();
    let out = phasefit(dir.path(), &["kij", "--fluid", "binary.toml", "-t", "323.15,373.15"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.starts_with("T_K,component,CH4,CO2"));
    assert_eq!(s.lines().count(), 5);
}

#[test]
fn input_errors_exit_2() {
    let dir = workspace();
    assert_eq!(phasefit(dir.path(), &["kij", "-t", "300"]).status.code(), Some(2));
    assert_eq!(phasefit(dir.path(), &["kij", "--fluid", "binary.toml", "-t", "300", "--metric", "r2"]).status.code(), Some(2));
    assert_eq!(phasefit(dir.path(), &["kij", "--fluid", "missing.toml", "-t", "300"]).status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), DECANE_OIL.replace("fraction = 0.3", "fraction = -0.3")).unwrap();
    let out = phasefit(dir.path(), &["kij", "--fluid", "bad.toml", "-t", "300"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("nC10"), "{}", text(&out.stderr));
    let out = phasefit(dir.path(), &["kij", "--fluid", "binary.toml", "-t", "300", "--kij", "CO2:XX=0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn envelope_marks_overrides() {
    let dir = workspace();
    let out = phasefit(
        dir.path(),
        &["envelope", "--fluid", "oil.toml", "-t", "260", "--z-co2", "0.3,0.5", "--kij", "CO2:CH4=0.105"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    let rows: Vec<&str> = s.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r.ends_with("overridden CO2:CH4=0.105"), "{r}");
    }
    let plain = phasefit(dir.path(), &["envelope", "--fluid", "oil.toml", "-t", "260", "--z-co2", "0.3"]);
    assert!(text(&plain.stdout).lines().nth(1).unwrap().ends_with("gc-predicted"));
}

#[test]
fn envelope_exit_codes_track_convergence() {
    let dir = workspace();
    // At k = 0.05 the boundary of the most loaded point lies above 40 MPa.
    let args = |z: &'static str| ["envelope", "--fluid", "oil.toml", "-t", "260", "--z-co2", z, "--kij", "CO2:CH4=0.05"];
    assert_eq!(phasefit(dir.path(), &args("0.3,0.75")).status.code(), Some(4));
    assert_eq!(phasefit(dir.path(), &args("0.75")).status.code(), Some(3));
}

#[test]
fn runs_persist_and_replay_identically() {
    let dir = workspace();
    let out = phasefit(
        dir.path(),
        &["envelope", "--fluid", "oil.toml", "-t", "260", "--z-range", "0.3:0.6:4", "--out", "run1"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let run = dir.path().join("run1");
    for f in ["envelope.csv", "envelope_manifest.json", "envelope_summary.json", "run.json"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    assert!(!run.join(".lock").exists());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("envelope_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["data"], "envelope.csv");
    let csv = fs::read_to_string(run.join("envelope.csv")).unwrap();
    assert!(csv.lines().nth(4).unwrap().starts_with("0.6,"), "{csv}");

    let rep = phasefit(dir.path(), &["replay", "run1", "--out", "run2"]);
    assert_eq!(rep.status.code(), Some(0), "{}", text(&rep.stderr));
    for f in ["envelope.csv", "envelope_manifest.json", "envelope_summary.json"] {
        assert_eq!(fs::read(run.join(f)).unwrap(), fs::read(dir.path().join("run2").join(f)).unwrap(), "{f}");
    }

    fs::write(dir.path().join("oil.toml"), DECANE_OIL.replace("0.7", "0.69").replace("0.3\n", "0.31\n")).unwrap();
    let stale = phasefit(dir.path(), &["replay", "run1", "--out", "run3"]);
    assert_eq!(stale.status.code(), Some(2));
    assert!(text(&stale.stderr).contains("oil.toml"));
}

#[test]
fn fit_writes_table_trace_and_record() {
    let dir = workspace();
    let base = mixture(&["CH4", "nC10", "CO2"], &[0.7, 0.3, 0.0]);
    let data = synthetic_dataset(&base, 260.0, &linspace(0.3, 0.7, 8), 0.11, 0.0, 1);
    fs::write(dir.path().join("exp.csv"), write_experiments(&data)).unwrap();
    let out = phasefit(
        dir.path(),
        &["fit", "--fluid", "oil.toml", "--experiments", "exp.csv", "--method", "golden", "--metric", "rmse"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let table = text(&out.stdout);
    assert!(table.starts_with("T_K,model,k,MAE,MSE,RMSE,RMSLE,MAXE"));
    let opt: Vec<&str> = table.lines().find(|l| l.contains("optimized")).unwrap().split(',').collect();
    let k: f64 = opt[2].parse().unwrap();
    assert!((k - 0.11).abs() < 0.002, "k = {k}");
    let runs: Vec<_> = fs::read_dir(dir.path().join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let run = runs[0].as_ref().unwrap().path();
    for f in ["fit_260K.json", "fit_260K_table.csv", "fit_260K_trace.csv", "fit_260K_manifest.json", "run.json"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["command"], "fit");
    assert_eq!(record["exit_code"], 0);
    assert_eq!(record["inputs"].as_object().unwrap().len(), 2);
}

#[test]
fn metrics_command() {
    let dir = workspace();
    fs::write(dir.path().join("p.txt"), "3\n5\n").unwrap();
    fs::write(dir.path().join("a.txt"), "1\n2\n").unwrap();
    let out = phasefit(dir.path(), &["metrics", "--predicted", "p.txt", "--actual", "a.txt", "--spider"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.contains("\"mse\": 6.5"), "{s}");
    assert!(s.contains("mse,6.5,divided_by_10,0.65"), "{s}");
    fs::write(dir.path().join("a.txt"), "1\n").unwrap();
    assert_eq!(phasefit(dir.path(), &["metrics", "--predicted", "p.txt", "--actual", "a.txt"]).status.code(), Some(2));
}

#[test]
fn flash_reports_two_phases() {
    let dir = workspace();
    let out = phasefit(dir.path(), &["flash", "--fluid", "binary.toml", "-t", "230", "-p", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["phase_count"], 2);
    assert_eq!(v["stability"]["stable"], false);
}

#[test]
fn bundled_fixtures_load() {
    let table = phasefit::GroupInteractionTable::bundled();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let f = phasefit::workbench::load_fluid(&p, &table).unwrap();
            assert!(f.warnings.is_empty(), "{}: {:?}", p.display(), f.warnings);
        }
    }
}
