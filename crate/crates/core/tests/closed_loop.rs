use std::io::{BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use simbridge::av::Verdict;
use simbridge::bench::{
    emit_report, parse_grid, run_bench_config, run_sweep, BenchOptions, BenchSetup,
};
use simbridge::bridge::{run_bridge, BridgeConfig, BridgeEnd};
use simbridge::config::{load_scenario, parse_sensor_kit, parse_topic_map, ViolationKind};
use simbridge::control::ControlParams;
use simbridge::messages::{EndReason, ImuSample, Message};
use simbridge::protocol::{check_ordering, read_frame, write_frame, MsgType, DEFAULT_MAX_PAYLOAD};
use simbridge::run::{cmd_run, run_closed_loop, ClosedLoopSetup, RunError};
use simbridge::sim::LoadModel;

// Timing-sensitive tests must not overlap.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|p| p.into_inner())
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn pair() -> (TcpStream, TcpStream) {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let a = TcpStream::connect(l.local_addr().unwrap()).unwrap();
    let (b, _) = l.accept().unwrap();
    (a, b)
}

fn small_bridge(deadline: Duration) -> BridgeConfig {
    let kit = parse_sensor_kit(
        r#"{"sensors": [{"id": "imu", "kind": "imu"}, {"id": "vehicle_status", "kind": "vehicle_status"}]}"#,
    )
    .unwrap();
    let topics = parse_topic_map(
        r#"{"topics": [{"source": "sim/imu", "destination": "av/imu"},
                       {"source": "sim/vehicle_status", "destination": "@split"}]}"#,
    )
    .unwrap();
    let vehicle = Default::default();
    BridgeConfig {
        kit,
        topics,
        control: ControlParams::tuned(0.61).unwrap(),
        vehicle,
        fixed_dt: 0.05,
        step_deadline: deadline,
        record_sequence: true,
        thread_registry: None,
    }
}

fn imu_frame(name: &str, step: u64) -> Message {
    Message::Imu(ImuSample {
        step,
        sensor_id: name.into(),
        ..Default::default()
    })
}

fn send(w: &mut impl Write, m: &Message) {
    write_frame(w, m.msg_type(), m.step(), &m.encode_payload().unwrap()).unwrap();
}

#[test]
fn release_kit_lockstep_is_ordered_and_accounted() {
    let _g = serial();
    let scenario = load_scenario(&configs().join("scenarios/three_sharp_turns_raw_steering.json")).unwrap();
    let mut setup = ClosedLoopSetup::from_scenario(&scenario);
    setup.bridge.record_sequence = true;
    let r = run_closed_loop(&setup).unwrap();
    assert_eq!(r.av.verdict, Verdict::LaneDeparture);
    assert!(matches!(r.bridge.end, BridgeEnd::Session { reason: EndReason::LaneDeparture, .. }));
    check_ordering(&r.bridge.seq_log).unwrap();
    // Every simulated step was ticked by the bridge and answered by the AV
    // side, except the final one that ended the session.
    assert_eq!(r.bridge.ticks, r.av.steps);
    assert_eq!(r.av.commands_sent + 1, r.av.steps);
    assert_eq!(r.bridge.controls_sent, r.av.commands_sent);
    assert_eq!(r.sim.steps, r.bridge.controls_sent);
    // No silent drops: every forwarded frame has a latency record.
    let kit_size = scenario.kit.sensors.len() as u64;
    assert_eq!(r.bridge.frames.forwarded, kit_size * r.bridge.ticks);
    assert_eq!(r.bridge.latency.records.len() as u64, r.bridge.frames.forwarded);
    assert_eq!((r.bridge.latency.drops, r.bridge.latency.orphans), (0, 0));
    assert_eq!(r.bridge.frames.stale + r.bridge.frames.unknown + r.bridge.frames.malformed, 0);
    // The AV side saw every non-status sensor once per step under its
    // destination topic.
    for (topic, n) in &r.av.sensor_frames {
        assert!(topic.starts_with("av/"), "{topic}");
        assert_eq!(*n, r.bridge.ticks, "{topic}");
    }
    assert_eq!(r.av.sensor_frames.len(), 5);
}

#[test]
fn missing_sensor_times_out_with_report() {
    let _g = serial();
    let (mut sim, bridge_sim) = pair();
    let (av, bridge_av) = pair();
    let cfg = small_bridge(Duration::from_millis(300));
    let h = thread::spawn(move || run_bridge(bridge_sim, bridge_av, &cfg).unwrap());
    // Only the IMU reports; vehicle_status never arrives.
    send(&mut sim, &imu_frame("imu", 0));
    let report = h.join().unwrap();
    match &report.end {
        BridgeEnd::Timeout(t) => {
            assert_eq!(t.step, 0);
            assert_eq!(t.missing.iter().collect::<Vec<_>>(), ["vehicle_status"]);
        }
        other => panic!("unexpected end {other:?}"),
    }
    assert_eq!(report.ticks, 0);
    // Both peers are told the session ended with an error.
    let mut r = BufReader::new(&sim);
    let f = read_frame(&mut r, DEFAULT_MAX_PAYLOAD).unwrap().unwrap();
    assert_eq!(f.msg_type, MsgType::SessionEnd);
    assert_eq!(f.payload, [EndReason::Error as u8]);
    let mut r = BufReader::new(&av);
    let mut saw_end = false;
    while let Ok(Some(f)) = read_frame(&mut r, DEFAULT_MAX_PAYLOAD) {
        saw_end |= f.msg_type == MsgType::SessionEnd;
    }
    assert!(saw_end);
}

#[test]
fn unknown_and_stale_frames_are_counted_not_forwarded() {
    let _g = serial();
    let (mut sim, bridge_sim) = pair();
    let (av, bridge_av) = pair();
    let cfg = small_bridge(Duration::from_millis(300));
    let h = thread::spawn(move || run_bridge(bridge_sim, bridge_av, &cfg).unwrap());
    send(&mut sim, &imu_frame("ghost", 0));
    send(&mut sim, &imu_frame("imu", 0));
    send(&mut sim, &imu_frame("imu", 0));
    send(&mut sim, &imu_frame("imu", 5));
    let report = h.join().unwrap();
    assert_eq!(report.frames.unknown, 1);
    assert_eq!(report.frames.stale, 2);
    assert_eq!(report.frames.forwarded, 1);
    drop(av);
}

#[test]
fn av_disconnect_ends_the_session() {
    let _g = serial();
    let (sim, bridge_sim) = pair();
    let (av, bridge_av) = pair();
    let cfg = small_bridge(Duration::from_secs(2));
    let h = thread::spawn(move || run_bridge(bridge_sim, bridge_av, &cfg).unwrap());
    let mut w = &sim;
    send(&mut w, &imu_frame("imu", 0));
    let status = Message::VehicleStatus(simbridge::messages::VehicleStatus {
        sensor_id: "vehicle_status".into(),
        orientation: simbridge::geom::Quaternion::IDENTITY,
        ..Default::default()
    });
    send(&mut w, &status);
    drop(av);
    let report = h.join().unwrap();
    assert_eq!(report.ticks, 1);
    assert!(matches!(report.end, BridgeEnd::AvDisconnected), "{:?}", report.end);
}

#[test]
fn missing_route_fails_before_launch() {
    let dir = tempfile::tempdir().unwrap();
    let src = configs().join("scenarios/straight_8p33.json");
    let text = std::fs::read_to_string(src).unwrap().replace("straight_500m", "no_such_route");
    let path = configs().join("scenarios/.missing_route_test.json");
    std::fs::write(&path, text).unwrap();
    let result = cmd_run(&path, dir.path());
    std::fs::remove_file(&path).unwrap();
    match result {
        Err(RunError::Config(e)) => {
            assert!(e.kinds().all(|k| matches!(k, ViolationKind::Io(_))), "{e}");
        }
        other => panic!("expected a config error, got {other:?}"),
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn straight_run_writes_trace() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let s = cmd_run(&configs().join("scenarios/straight_8p33.json"), dir.path()).unwrap();
    assert_eq!(s.verdict, Verdict::GoalReached);
    assert_eq!(s.outputs.len(), 1);
    let text = std::fs::read_to_string(&s.outputs[0]).unwrap();
    assert_eq!(text.lines().next(), Some("sim_time,lateral_deviation,speed"));
    assert_eq!(text.lines().count() as u64, s.steps + 1);
}

#[test]
fn tiny_sweep_emits_one_row() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let grid = parse_grid(r#"{"duration_s": 1, "warmup_s": 0.5, "lidar_counts": [1], "lidar_densities": [1000]}"#).unwrap();
    let reports = run_sweep(&grid, LoadModel::CALIBRATED);
    assert_eq!(reports.len(), 1);
    let r = &reports[0];
    assert_eq!(r.error, None);
    assert!(r.fps.fps > 0.0 && r.ticks > 0);
    assert!(r.summary_latency.total > 0);
    assert!(r.latency.contains_key("lidar"));
    let files = emit_report(&reports, dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    let csv = std::fs::read_to_string(&files[0]).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("lidar,1,1000,"));
}

#[test]
fn repeated_config_fps_is_stable() {
    let _g = serial();
    let opts = BenchOptions {
        duration: Duration::from_secs(4),
        warmup: Duration::from_secs(1),
        seed: 1,
        load_model: LoadModel::CALIBRATED,
    };
    let fps: Vec<f64> = (0..3)
        .map(|_| run_bench_config(&BenchSetup::lidars(1, 100_000), &opts).fps.fps)
        .collect();
    let max = fps.iter().cloned().fold(f64::MIN, f64::max);
    let min = fps.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (max - min) / max;
    assert!(spread < 0.15, "FPS {fps:?} spread {spread:.3}");
}
