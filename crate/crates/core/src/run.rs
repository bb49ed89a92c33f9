//! Closed-loop orchestration: one simulator, one bridge and one AV client
//! over loopback TCP.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{info, warn};
use thiserror::Error;

use crate::av::{run_av_stream, AvClientConfig, AvReport, Verdict, VehicleGeometry};
use crate::bridge::{run_bridge, BridgeConfig, BridgeEnd, BridgeReport};
use crate::config::{load_scenario, ConfigErrors, LoadedScenario};
use crate::sim::{run_sim_server, SimReport, SimServerConfig, VehicleState, World};

#[derive(Debug, Clone)]
pub struct ClosedLoopSetup {
    pub sim: SimServerConfig,
    pub bridge: BridgeConfig,
    pub av: AvClientConfig,
}

impl ClosedLoopSetup {
    pub fn from_scenario(s: &LoadedScenario) -> Self {
        let c = &s.config;
        // Scenario poses are given in the AV frame.
        let initial = VehicleState::at_pose(c.initial_pose.x, -c.initial_pose.y, -c.initial_pose.yaw);
        Self {
            sim: SimServerConfig {
                kit: s.kit.clone(),
                vehicle: s.vehicle.clone(),
                world: World::default(),
                initial,
                seed: c.seed,
                fixed_dt: c.fixed_dt,
                load_model: c.load_model,
            },
            bridge: BridgeConfig {
                kit: s.kit.clone(),
                topics: s.topics.clone(),
                vehicle: s.vehicle.clone(),
                control: s.controller.clone(),
                fixed_dt: c.fixed_dt,
                step_deadline: c.step_deadline,
                record_sequence: false,
                thread_registry: None,
            },
            av: AvClientConfig {
                route: s.route.clone(),
                geometry: VehicleGeometry {
                    wheelbase: s.vehicle.wheelbase,
                    max_tire_angle: s.vehicle.max_tire_angle,
                },
                follower: c.follower,
                fixed_dt: c.fixed_dt,
                duration_s: c.duration_s,
                wall_limit: None,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClosedLoopReport {
    pub sim: SimReport,
    pub bridge: BridgeReport,
    pub av: AvReport,
    pub wall_time: Duration,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration:\n{0}")]
    Config(#[from] ConfigErrors),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{0} panicked")]
    Panicked(&'static str),
    #[error("trace export failed: {0}")]
    Trace(#[from] csv::Error),
}

/// Connects to `addr`, retrying until `patience` runs out.
pub fn connect_with_retry(addr: SocketAddr, patience: Duration) -> io::Result<TcpStream> {
    let until = Instant::now() + patience;
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= until => return Err(e),
            Err(_) => thread::sleep(Duration::from_millis(50)),
        }
    }
}

/// Runs all three components in this process on ephemeral loopback ports.
pub fn run_closed_loop(setup: &ClosedLoopSetup) -> Result<ClosedLoopReport, RunError> {
    let started = Instant::now();
    let sim_listener = TcpListener::bind("127.0.0.1:0")?;
    let sim_addr = sim_listener.local_addr()?;
    let av_listener = TcpListener::bind("127.0.0.1:0")?;
    let av_addr = av_listener.local_addr()?;

    let sim_cfg = setup.sim.clone();
    let sim = thread::Builder::new()
        .name("sim".into())
        .spawn(move || run_sim_server(sim_listener, &sim_cfg))?;
    let av_cfg = setup.av.clone();
    let av = thread::Builder::new().name("av".into()).spawn(move || {
        let stream = connect_with_retry(av_addr, Duration::from_secs(5))?;
        run_av_stream(stream, &av_cfg)
    })?;

    let bridge = (|| {
        let sim_stream = TcpStream::connect(sim_addr)?;
        let (av_stream, _) = av_listener.accept()?;
        run_bridge(sim_stream, av_stream, &setup.bridge)
    })();
    if bridge.is_err() {
        // Unblock whichever side is still waiting for a peer.
        let _ = TcpStream::connect(sim_addr);
    }
    let sim = sim.join().map_err(|_| RunError::Panicked("simulator"))?;
    let av = av.join().map_err(|_| RunError::Panicked("AV client"))?;
    let bridge = bridge?;
    Ok(ClosedLoopReport {
        sim: sim?,
        av: av?,
        bridge,
        wall_time: started.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub verdict: Verdict,
    pub steps: u64,
    pub wall_time: Duration,
    pub outputs: Vec<PathBuf>,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.verdict == Verdict::GoalReached
    }
}

pub fn trace_path(out_dir: &Path, scenario_name: &str) -> PathBuf {
    out_dir.join(format!("{scenario_name}_trace.csv"))
}

/// Loads a scenario, runs it in-process and writes the deviation trace.
pub fn cmd_run(scenario: &Path, out_dir: &Path) -> Result<RunSummary, RunError> {
    let loaded = load_scenario(scenario)?;
    let setup = ClosedLoopSetup::from_scenario(&loaded);
    info!("running {} for at most {} s of sim time", loaded.config.name, loaded.config.duration_s);
    let report = run_closed_loop(&setup)?;
    if let BridgeEnd::Timeout(t) = &report.bridge.end {
        warn!("step {} timed out waiting for {:?}", t.step, t.missing);
    }
    std::fs::create_dir_all(out_dir)?;
    let trace = trace_path(out_dir, &loaded.config.name);
    report.av.trace.save_csv(&trace)?;
    Ok(RunSummary {
        verdict: report.av.verdict,
        steps: report.av.steps,
        wall_time: report.wall_time,
        outputs: vec![trace],
    })
}

/// Registry shared with the bridge so its threads can be sampled.
pub fn thread_registry() -> Arc<Mutex<Vec<i32>>> {
    Arc::new(Mutex::new(Vec::new()))
}

/// Simulator half of a distributed run: listens on the scenario's simulator
/// endpoint and serves one bridge.
pub fn sim_component(s: &LoadedScenario) -> Result<SimReport, RunError> {
    let setup = ClosedLoopSetup::from_scenario(s);
    let listener = TcpListener::bind(s.config.endpoints.sim)?;
    info!("simulator listening on {}", listener.local_addr()?);
    Ok(run_sim_server(listener, &setup.sim)?)
}

/// Bridge half of a distributed run: accepts the AV client on the AV
/// endpoint and connects to the simulator.
pub fn bridge_component(s: &LoadedScenario, patience: Duration) -> Result<BridgeReport, RunError> {
    let setup = ClosedLoopSetup::from_scenario(s);
    let listener = TcpListener::bind(s.config.endpoints.av)?;
    info!("bridge listening for the AV stack on {}", listener.local_addr()?);
    let sim = connect_with_retry(s.config.endpoints.sim, patience)?;
    let (av, _) = listener.accept()?;
    Ok(run_bridge(sim, av, &setup.bridge)?)
}

/// AV half of a distributed run. Writes the trace like `cmd_run`.
pub fn av_component(s: &LoadedScenario, out_dir: &Path, patience: Duration) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    let setup = ClosedLoopSetup::from_scenario(s);
    let stream = connect_with_retry(s.config.endpoints.av, patience)?;
    let report = run_av_stream(stream, &setup.av)?;
    std::fs::create_dir_all(out_dir)?;
    let trace = trace_path(out_dir, &s.config.name);
    report.trace.save_csv(&trace)?;
    Ok(RunSummary {
        verdict: report.verdict,
        steps: report.steps,
        wall_time: started.elapsed(),
        outputs: vec![trace],
    })
}
