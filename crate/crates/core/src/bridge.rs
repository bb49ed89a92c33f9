//! The bridge proper: gates simulator steps on complete sensor sets,
//! converts and remaps sensor data for the AV side and turns AV commands
//! into simulator controls.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};

use crate::bench::{current_tid, LatencyLog, LatencyRecorder};
use crate::config::{SensorKitConfig, VehicleParameters};
use crate::control::{ControlConverter, ControlParams};
use crate::convert::{
    convert_imu, convert_pointcloud, convert_vehicle_status, split_vehicle_status, Destination,
    TopicMap,
};
use crate::messages::{
    encode_point_cloud_payload, peek_name, rename_payload, AckermannCommand, EndReason, Message,
};
use crate::protocol::{
    read_frame, write_frame, MsgType, SeqEvent, TickCoordinator, TickDecision, TickLedger,
    TimeoutReport, WireError, WireFrame, DEFAULT_MAX_PAYLOAD,
};

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    pub kit: SensorKitConfig,
    pub topics: TopicMap,
    pub vehicle: VehicleParameters,
    pub control: ControlParams,
    pub fixed_dt: f64,
    pub step_deadline: Duration,
    pub record_sequence: bool,
    /// Receives the kernel ids of the bridge threads, for CPU accounting.
    pub thread_registry: Option<Arc<Mutex<Vec<i32>>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BridgeEnd {
    Session { step: u64, reason: EndReason },
    Timeout(TimeoutReport),
    SimDisconnected,
    AvDisconnected,
    Error(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameCounts {
    pub forwarded: u64,
    pub stale: u64,
    pub unknown: u64,
    pub malformed: u64,
}

#[derive(Debug, Clone)]
pub struct BridgeReport {
    pub ticks: u64,
    pub controls_sent: u64,
    pub frames: FrameCounts,
    pub latency: LatencyLog,
    pub tick_times: Vec<Instant>,
    pub seq_log: Vec<SeqEvent>,
    pub started: Instant,
    pub finished: Instant,
    pub end: BridgeEnd,
}

enum AvEvent {
    Command(AckermannCommand),
    SessionEnd { step: u64, reason: EndReason },
    Closed,
}

type SharedWriter = Arc<Mutex<BufWriter<TcpStream>>>;

fn send(w: &SharedWriter, msg_type: MsgType, step: u64, payload: &[u8]) -> Result<(), WireError> {
    let mut g = w.lock().unwrap_or_else(|p| p.into_inner());
    write_frame(&mut *g, msg_type, step, payload)
}

fn send_msg(w: &SharedWriter, msg: &Message) -> Result<(), WireError> {
    let payload = msg.encode_payload().map_err(|e| WireError::Io(std::io::Error::other(e)))?;
    send(w, msg.msg_type(), msg.step(), &payload)
}

fn register(cfg: &BridgeConfig) {
    if let Some(r) = &cfg.thread_registry {
        r.lock().unwrap_or_else(|p| p.into_inner()).push(current_tid());
    }
}

struct SensorPath {
    coordinator: TickCoordinator,
    topics: TopicMap,
    wheelbase: f64,
    av: SharedWriter,
    speed: Arc<AtomicU64>,
    index: HashMap<String, u64>,
    epoch: Instant,
}

enum Forward {
    Done,
    Skipped,
}

impl SensorPath {
    fn now(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    /// Converts one accepted frame and writes it to the AV side.
    fn forward(&self, frame: &WireFrame, name: &str) -> Result<Forward, WireError> {
        let Ok(remap) = self.topics.remap_sensor(name) else {
            return Ok(Forward::Skipped);
        };
        let step = frame.step;
        let malformed = |e| {
            warn!("dropping malformed {:?} from {name}: {e}", frame.msg_type);
            Ok(Forward::Skipped)
        };
        match (remap.destination, frame.msg_type) {
            (Destination::Split, MsgType::VehicleStatus) => {
                let status = match Message::from_frame(frame) {
                    Ok(Message::VehicleStatus(s)) => s,
                    Ok(_) => unreachable!(),
                    Err(e) => return malformed(e.to_string()),
                };
                self.speed.store(status.velocity.to_bits(), Ordering::Release);
                let status = match convert_vehicle_status(status) {
                    Ok(s) => s,
                    Err(e) => return malformed(e.to_string()),
                };
                let split = split_vehicle_status(&status, self.wheelbase);
                send_msg(&self.av, &Message::SteeringReport(split.steering))?;
                send_msg(&self.av, &Message::VelocityReport(split.velocity))?;
                send_msg(&self.av, &Message::Odometry(split.odometry))?;
            }
            (Destination::Split, _) => return Ok(Forward::Skipped),
            (Destination::Topic(topic), MsgType::PointCloud) => {
                let cloud = match Message::from_frame(frame) {
                    Ok(Message::PointCloud(c)) => convert_pointcloud(c),
                    Ok(_) => unreachable!(),
                    Err(e) => return malformed(e.to_string()),
                };
                send(&self.av, MsgType::PointCloud, step, &encode_point_cloud_payload(topic, &cloud.points))?;
            }
            (Destination::Topic(topic), MsgType::Imu) => {
                let mut imu = match Message::from_frame(frame) {
                    Ok(Message::Imu(s)) => match convert_imu(s) {
                        Ok(s) => s,
                        Err(e) => return malformed(e.to_string()),
                    },
                    Ok(_) => unreachable!(),
                    Err(e) => return malformed(e.to_string()),
                };
                imu.sensor_id = topic.clone();
                send_msg(&self.av, &Message::Imu(imu))?;
            }
            (Destination::Topic(topic), MsgType::VehicleStatus) => {
                let status = match Message::from_frame(frame) {
                    Ok(Message::VehicleStatus(s)) => s,
                    Ok(_) => unreachable!(),
                    Err(e) => return malformed(e.to_string()),
                };
                self.speed.store(status.velocity.to_bits(), Ordering::Release);
                let mut status = match convert_vehicle_status(status) {
                    Ok(s) => s,
                    Err(e) => return malformed(e.to_string()),
                };
                status.sensor_id = topic.clone();
                send_msg(&self.av, &Message::VehicleStatus(status))?;
            }
            // Images and fixes carry no handedness; only the name changes.
            (Destination::Topic(topic), t) => match rename_payload(&frame.payload, topic) {
                Ok(p) => send(&self.av, t, step, &p)?,
                Err(e) => return malformed(e.to_string()),
            },
        }
        Ok(Forward::Done)
    }

    fn run(self, sim: TcpStream) -> (FrameCounts, LatencyLog, BridgeEnd) {
        let mut reader = BufReader::with_capacity(256 * 1024, sim);
        let mut counts = FrameCounts::default();
        let mut recorder = LatencyRecorder::new();
        let n_sensors = self.index.len() as u64;
        let end = loop {
            let frame = match read_frame(&mut reader, DEFAULT_MAX_PAYLOAD) {
                Ok(Some(f)) => f,
                Ok(None) => break BridgeEnd::SimDisconnected,
                Err(WireError::Io(e)) => {
                    debug!("simulator link closed: {e}");
                    break BridgeEnd::SimDisconnected;
                }
                Err(e) => break BridgeEnd::Error(e.to_string()),
            };
            let ingress = self.now();
            if !matches!(
                frame.msg_type,
                MsgType::PointCloud | MsgType::Image | MsgType::Imu | MsgType::Gnss | MsgType::VehicleStatus
            ) {
                warn!("bridge ignoring {:?} from the simulator", frame.msg_type);
                continue;
            }
            let name = match peek_name(&frame.payload) {
                Ok(n) => n.to_owned(),
                Err(_) => {
                    counts.malformed += 1;
                    continue;
                }
            };
            let decision = self.coordinator.arrive(&name, frame.step);
            match decision {
                TickDecision::NoTick | TickDecision::Tick { .. } => {}
                TickDecision::UnknownSensor => {
                    counts.unknown += 1;
                    continue;
                }
                TickDecision::StaleData | TickDecision::Duplicate | TickDecision::Ahead => {
                    counts.stale += 1;
                    debug!("rejecting {name} for step {}: {decision:?}", frame.step);
                    continue;
                }
            }
            let msg_id = frame.step * n_sensors + self.index[&name];
            if let Err(e) = recorder.record_ingress(msg_id, &name, ingress) {
                warn!("{e}");
            }
            match self.forward(&frame, &name) {
                Ok(Forward::Done) => {
                    counts.forwarded += 1;
                    let _ = recorder.record_egress(msg_id, self.now());
                }
                Ok(Forward::Skipped) => counts.malformed += 1,
                Err(_) => break BridgeEnd::AvDisconnected,
            }
            if let TickDecision::Tick { step } = decision {
                if send(&self.av, MsgType::StepEnd, step, &[]).is_err() {
                    break BridgeEnd::AvDisconnected;
                }
            }
        };
        (counts, recorder.finish(), end)
    }
}

fn av_reader(av: TcpStream, tx: mpsc::Sender<AvEvent>) {
    let mut reader = BufReader::new(av);
    loop {
        let frame = match read_frame(&mut reader, DEFAULT_MAX_PAYLOAD) {
            Ok(Some(f)) => f,
            Ok(None) | Err(_) => {
                let _ = tx.send(AvEvent::Closed);
                return;
            }
        };
        let event = match Message::from_frame(&frame) {
            Ok(Message::Command(c)) => AvEvent::Command(c),
            Ok(Message::SessionEnd { step, reason }) => AvEvent::SessionEnd { step, reason },
            Ok(other) => {
                debug!("bridge ignoring {:?} from the AV side", other.msg_type());
                continue;
            }
            Err(e) => {
                warn!("bridge dropping malformed AV frame: {e}");
                continue;
            }
        };
        if tx.send(event).is_err() {
            return;
        }
    }
}

/// Runs one session between a connected simulator and AV endpoint until
/// either side ends it, disconnects or misses the step deadline.
pub fn run_bridge(sim: TcpStream, av: TcpStream, cfg: &BridgeConfig) -> std::io::Result<BridgeReport> {
    sim.set_nodelay(true)?;
    av.set_nodelay(true)?;
    register(cfg);
    let started = Instant::now();
    let ledger = TickLedger::new(cfg.kit.ids(), cfg.step_deadline)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
    let (coordinator, waiter) = TickCoordinator::new(ledger, cfg.record_sequence);
    let av_writer: SharedWriter = Arc::new(Mutex::new(BufWriter::with_capacity(256 * 1024, av.try_clone()?)));
    let mut sim_writer = BufWriter::new(sim.try_clone()?);
    let speed = Arc::new(AtomicU64::new(0f64.to_bits()));
    let mut converter = ControlConverter::new(cfg.control.clone())
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;

    let path = SensorPath {
        coordinator,
        topics: cfg.topics.clone(),
        wheelbase: cfg.vehicle.wheelbase,
        av: av_writer.clone(),
        speed: speed.clone(),
        index: cfg.kit.ids().enumerate().map(|(i, id)| (id.to_owned(), i as u64)).collect(),
        epoch: started,
    };
    let sim_read = sim.try_clone()?;
    let reg = cfg.clone();
    let sensor_thread = thread::Builder::new()
        .name("bridge-sensors".into())
        .spawn(move || {
            register(&reg);
            path.run(sim_read)
        })?;
    let (av_tx, av_rx) = mpsc::channel();
    let av_read = av.try_clone()?;
    let reg = cfg.clone();
    let av_thread = thread::Builder::new().name("bridge-av".into()).spawn(move || {
        register(&reg);
        av_reader(av_read, av_tx)
    })?;

    let mut tick_times = Vec::new();
    let mut controls_sent = 0u64;
    let mut graceful = false;
    let end = 'steps: loop {
        let n = match waiter.await_step_or_timeout(cfg.step_deadline) {
            Ok(n) => n,
            Err(crate::protocol::AwaitError::Timeout(r)) => break BridgeEnd::Timeout(r),
            Err(_) => break BridgeEnd::SimDisconnected,
        };
        tick_times.push(Instant::now());
        let deadline = Instant::now() + cfg.step_deadline;
        let cmd = loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match av_rx.recv_timeout(left) {
                Ok(AvEvent::Command(c)) if c.step == n => break c,
                Ok(AvEvent::Command(c)) => warn!("discarding command for step {} at step {n}", c.step),
                Ok(AvEvent::SessionEnd { step, reason }) => {
                    let _ = write_frame(&mut sim_writer, MsgType::SessionEnd, step, &[reason as u8]);
                    graceful = true;
                    break 'steps BridgeEnd::Session { step, reason };
                }
                Ok(AvEvent::Closed) | Err(RecvTimeoutError::Disconnected) => {
                    break 'steps BridgeEnd::AvDisconnected;
                }
                Err(RecvTimeoutError::Timeout) => {
                    break 'steps BridgeEnd::Timeout(TimeoutReport {
                        step: n,
                        missing: ["av_command".to_owned()].into(),
                        waited: cfg.step_deadline,
                    });
                }
            }
        };
        let current = f64::from_bits(speed.load(Ordering::Acquire));
        let control = match converter.convert(&cmd, current, cfg.fixed_dt) {
            Ok(c) => c,
            Err(e) => {
                warn!("rejecting command for step {n}: {e}");
                crate::messages::VehicleControl {
                    step: n,
                    ..Default::default()
                }
            }
        };
        let sent = Message::Control(control)
            .encode_payload()
            .map_err(|e| WireError::Io(std::io::Error::other(e)))
            .and_then(|p| write_frame(&mut sim_writer, MsgType::VehicleControl, n, &p))
            .and_then(|_| write_frame(&mut sim_writer, MsgType::Tick, n, &[]));
        if sent.is_err() {
            break BridgeEnd::SimDisconnected;
        }
        controls_sent += 1;
    };

    if !graceful {
        let step = waiter.current_step();
        let reason = [EndReason::Error as u8];
        let _ = write_frame(&mut sim_writer, MsgType::SessionEnd, step, &reason);
        let _ = send(&av_writer, MsgType::SessionEnd, step, &reason);
        let _ = sim.shutdown(Shutdown::Both);
    }
    let _ = sim_writer.flush();
    let (frames, latency, sensor_end) = sensor_thread
        .join()
        .unwrap_or_else(|_| (FrameCounts::default(), LatencyLog::default(), BridgeEnd::Error("sensor thread panicked".into())));
    {
        let mut g = av_writer.lock().unwrap_or_else(|p| p.into_inner());
        let _ = g.flush();
    }
    let _ = av.shutdown(Shutdown::Write);
    if !graceful {
        let _ = av.shutdown(Shutdown::Both);
    }
    let _ = av_thread.join();
    let _ = sim.shutdown(Shutdown::Both);
    let end = match (end, sensor_end) {
        (BridgeEnd::SimDisconnected, e @ BridgeEnd::Error(_)) => e,
        (BridgeEnd::SimDisconnected, BridgeEnd::AvDisconnected) => BridgeEnd::AvDisconnected,
        (e, _) => e,
    };
    Ok(BridgeReport {
        ticks: waiter.ticks(),
        controls_sent,
        frames,
        latency,
        tick_times,
        seq_log: waiter.take_log(),
        started,
        finished: Instant::now(),
        end,
    })
}
