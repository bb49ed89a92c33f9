use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_simbridge"));
    c.env("SIMBRIDGE_LOG", "warn");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_goal_reached_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run"])
        .arg(configs().join("scenarios/straight_8p33.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("verdict: goal-reached"), "{text}");
    let trace = dir.path().join("straight_8p33_trace.csv");
    assert!(text.contains(&format!("output: {}", trace.display())));
    assert!(trace.exists());
}

#[test]
fn run_lane_departure_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .arg("run")
        .arg(configs().join("scenarios/three_sharp_turns_raw_steering.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("verdict: lane-departure"));
}

#[test]
fn run_with_bad_config_fails_before_launch() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, r#"{"route": "nope.json", "duration_s": 10}"#).unwrap();
    let o = bin().arg("run").arg(&scenario).arg("--out").arg(dir.path().join("out")).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid configuration"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn distributed_run_matches_in_process_trace() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(configs().join("scenarios/straight_8p33.json")).unwrap();
    let text = src
        .replace("127.0.0.1:2000", "127.0.0.1:38411")
        .replace("127.0.0.1:9090", "127.0.0.1:38412");
    let scenario = configs().join("scenarios/.distributed_test.json");
    std::fs::write(&scenario, text).unwrap();
    let a = bin()
        .args(["run", "--distributed"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("d"))
        .output()
        .unwrap();
    let b = bin().arg("run").arg(&scenario).arg("--out").arg(dir.path().join("i")).output().unwrap();
    std::fs::remove_file(&scenario).unwrap();
    assert!(a.status.success(), "{a:?}");
    assert!(b.status.success(), "{b:?}");
    let name = "straight_8p33_trace.csv";
    let ta = std::fs::read(dir.path().join("d").join(name)).unwrap();
    let tb = std::fs::read(dir.path().join("i").join(name)).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn validate_reports_each_file() {
    let o = bin()
        .arg("validate")
        .arg(configs().join("kits/release.json"))
        .arg(configs().join("vehicles/van.json"))
        .arg(configs().join("scenarios/three_sharp_turns.json"))
        .arg(configs().join("sweeps/full_grid.json"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).matches(": ok").count(), 4);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("kit.json");
    std::fs::write(
        &bad,
        r#"{"sensors": [{"id": "a", "kind": "lidar"}, {"id": "a", "kind": "radar"}]}"#,
    )
    .unwrap();
    let o = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("4 error(s)"), "{text}");
}

#[test]
fn bench_sweep_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["bench", "sweep", "--grid"])
        .arg(configs().join("sweeps/smoke.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(stdout(&o).contains("report.csv"));
}

#[test]
fn bench_single_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "bench",
            "--lidars",
            "1",
            "--points-per-sec",
            "1000",
            "--cameras",
            "1",
            "--resolution",
            "320x240",
            "--duration",
            "1",
            "--warmup",
            "0.5",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("lidar+camera,1+1,1000;320x240,"), "{row}");
}

#[test]
fn bad_resolution_is_rejected() {
    let o = bin().args(["bench", "--resolution", "wide"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn log_level_comes_from_the_environment() {
    let o = bin()
        .env("SIMBRIDGE_LOG", "debug")
        .arg("validate")
        .arg(configs().join("vehicles/van.json"))
        .arg(configs().join("scenarios/straight_8p33.json"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let quiet = bin()
        .arg("run")
        .arg(configs().join("scenarios/straight_8p33.json"))
        .arg("--out")
        .arg(tempfile::tempdir().unwrap().path())
        .output()
        .unwrap();
    assert!(!String::from_utf8_lossy(&quiet.stderr).contains("INFO"));
    let loud = bin()
        .env("SIMBRIDGE_LOG", "info")
        .arg("run")
        .arg(configs().join("scenarios/straight_8p33.json"))
        .arg("--out")
        .arg(tempfile::tempdir().unwrap().path())
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&loud.stderr).contains("INFO"));
}
