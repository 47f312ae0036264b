//! End-to-end runs of the `swarmsim` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn swarmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmsim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_traces_and_summary() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("example.ini");
    let o = swarmsim(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--scenario",
        "Sim3dadca",
        "--seed",
        "4",
        "--until",
        "300s",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Sim3dadca seed 4"));
    for f in ["summary.json", "position.csv", "tx.csv", "rx.csv", "pair.csv", "data.csv", "command.csv"] {
        assert!(out.path().join(f).is_file(), "missing {f}");
    }
    let text = std::fs::read_to_string(out.path().join("summary.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(summary["seed"], 4);
    assert_eq!(summary["sim_end_time"], "300.000000");
    assert_eq!(summary["nodes"].as_array().unwrap().len(), 7);
    assert!(summary["totals"]["ground_data_received"].as_u64().is_some());
}

#[test]
fn zero_horizon_and_trace_options() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("example.ini");
    let o = swarmsim(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--scenario",
        "Sim2drone",
        "--until",
        "0",
        "--position-interval",
        "0s",
        "--no-message-trace",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(": 0 events to t=0.000000"), "{}", stdout(&o));
    let tx = std::fs::read_to_string(out.path().join("tx.csv")).unwrap();
    assert_eq!(tx.lines().count(), 1, "only the header: {tx}");
}

#[test]
fn abstract_scenario_exits_3() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixtures().join("example.ini");
    let o = swarmsim(&["run", "--config", cfg.to_str().unwrap(), "--scenario", "Wifi", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("abstract"));
}

#[test]
fn bad_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.ini");
    std::fs::write(&cfg, "[General]\n*.numUAVs = 1\n[Config X\n").unwrap();
    let o = swarmsim(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("broken.ini") && err.contains("line 3"), "{err}");
}

#[test]
fn list_configs() {
    let cfg = fixtures().join("example.ini");
    let o = swarmsim(&["list-configs", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("Wifi (abstract)"), "{text}");
    assert!(text.contains("Sim3dadcaFailure extends Sim3dadca -> Wifi"), "{text}");
}

#[test]
fn validate_mission() {
    let ok = swarmsim(&["validate-mission", fixtures().join("two_point.waypoints").to_str().unwrap()]);
    assert!(ok.status.success());
    assert!(stdout(&ok).starts_with("2 waypoints, tour 5.0 m"), "{}", stdout(&ok));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.waypoints");
    std::fs::write(&bad, "QGC WPL 110\n0\t1\t1\t21\t0\t0\t0\t0\t0\t0\t0\t1\n").unwrap();
    let o = swarmsim(&["validate-mission", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported MAV command 21"), "{}", stderr(&o));
}
