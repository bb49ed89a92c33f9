use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::time::{Duration, Instant};

use log::{debug, warn};

use crate::messages::{peek_name, AckermannCommand, EndReason, Message, Odometry, VelocityReport};
use crate::protocol::{read_frame, write_frame, MsgType, DEFAULT_MAX_PAYLOAD};

use super::pursuit::{follow_route, PursuitParams, VehicleGeometry};
use super::route::{Pose2, Route};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    GoalReached,
    LaneDeparture,
    Timeout,
    /// Ended by an external wall-clock limit, used by benchmark runs.
    Stopped,
    Error,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::GoalReached => "goal-reached",
            Verdict::LaneDeparture => "lane-departure",
            Verdict::Timeout => "timeout",
            Verdict::Stopped => "stopped",
            Verdict::Error => "error",
        }
    }

    pub fn end_reason(self) -> EndReason {
        match self {
            Verdict::GoalReached => EndReason::GoalReached,
            Verdict::LaneDeparture => EndReason::LaneDeparture,
            Verdict::Timeout => EndReason::Timeout,
            Verdict::Stopped => EndReason::Stopped,
            Verdict::Error => EndReason::Error,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub sim_time: f64,
    /// Positive to the left of the centerline.
    pub lateral_deviation: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeviationTrace {
    samples: Vec<TraceSample>,
}

impl DeviationTrace {
    /// Rejects samples that do not advance simulation time.
    pub fn push(&mut self, s: TraceSample) -> Result<(), TraceSample> {
        match self.samples.last() {
            Some(last) if s.sim_time <= last.sim_time => Err(s),
            _ => {
                self.samples.push(s);
                Ok(())
            }
        }
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.lateral_deviation.abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sim_time", "lateral_deviation", "speed"])?;
        for s in &self.samples {
            out.write_record([
                format!("{:.3}", s.sim_time),
                format!("{:.6}", s.lateral_deviation),
                format!("{:.6}", s.speed),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> csv::Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvClientConfig {
    pub route: Route,
    pub geometry: VehicleGeometry,
    pub follower: PursuitParams,
    pub fixed_dt: f64,
    /// Simulated seconds before declaring a timeout.
    pub duration_s: f64,
    /// Optional wall-clock limit; reaching it ends the run as stopped.
    pub wall_limit: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvReport {
    pub verdict: Verdict,
    pub trace: DeviationTrace,
    pub steps: u64,
    pub commands_sent: u64,
    /// Received sensor frames per destination topic.
    pub sensor_frames: BTreeMap<String, u64>,
    pub detail: Option<String>,
}

fn yaw_of(o: &Odometry) -> f64 {
    o.orientation.yaw()
}

/// Drives the route from converted reports. On every `StepEnd(n)` the client
/// either answers with one command for step n or ends the session.
pub fn run_av_client<R: Read, W: Write>(reader: R, writer: W, cfg: &AvClientConfig) -> AvReport {
    let mut reader = BufReader::with_capacity(256 * 1024, reader);
    let mut writer = BufWriter::new(writer);
    let started = Instant::now();
    let mut trace = DeviationTrace::default();
    let mut odom: Option<Odometry> = None;
    let mut velocity: Option<VelocityReport> = None;
    let mut sensor_frames = BTreeMap::new();
    let mut steps = 0u64;
    let mut commands_sent = 0u64;

    let finish = |verdict, detail: Option<String>, trace, steps, commands_sent, sensor_frames| AvReport {
        verdict,
        trace,
        steps,
        commands_sent,
        sensor_frames,
        detail,
    };

    loop {
        let frame = match read_frame(&mut reader, DEFAULT_MAX_PAYLOAD) {
            Ok(Some(f)) => f,
            Ok(None) => {
                return finish(Verdict::Timeout, Some("bridge closed the connection".into()), trace, steps, commands_sent, sensor_frames)
            }
            Err(e) => return finish(Verdict::Timeout, Some(e.to_string()), trace, steps, commands_sent, sensor_frames),
        };
        match frame.msg_type {
            MsgType::PointCloud | MsgType::Image | MsgType::Imu | MsgType::Gnss => {
                let name = peek_name(&frame.payload).unwrap_or("<malformed>").to_owned();
                *sensor_frames.entry(name).or_insert(0) += 1;
                continue;
            }
            _ => {}
        }
        let msg = match Message::from_frame(&frame) {
            Ok(m) => m,
            Err(e) => {
                warn!("AV client dropping malformed {:?}: {e}", frame.msg_type);
                continue;
            }
        };
        let n = match msg {
            Message::Odometry(o) => {
                odom = Some(o);
                continue;
            }
            Message::VelocityReport(v) => {
                velocity = Some(v);
                continue;
            }
            Message::SteeringReport(_) => continue,
            Message::SessionEnd { reason, .. } => {
                let detail = format!("bridge ended the session: {reason:?}");
                return finish(Verdict::Error, Some(detail), trace, steps, commands_sent, sensor_frames);
            }
            Message::StepEnd { step } => step,
            other => {
                debug!("AV client ignoring {:?}", other.msg_type());
                continue;
            }
        };

        let Some(o) = odom.filter(|o| o.step == n) else {
            let detail = format!("no odometry for step {n}");
            let _ = end_session(&mut writer, &mut reader, n, Verdict::Error);
            return finish(Verdict::Error, Some(detail), trace, steps, commands_sent, sensor_frames);
        };
        let speed = velocity
            .filter(|v| v.step == n)
            .map(|v| v.longitudinal_velocity)
            .unwrap_or(o.linear_velocity);
        let pose = Pose2 {
            x: o.position.x,
            y: o.position.y,
            yaw: yaw_of(&o),
        };
        let deviation = cfg.route.project(pose.x, pose.y).deviation;
        let sim_time = n as f64 * cfg.fixed_dt;
        if trace
            .push(TraceSample {
                sim_time,
                lateral_deviation: deviation,
                speed,
            })
            .is_err()
        {
            warn!("step {n} does not advance simulation time");
        }
        steps += 1;

        let verdict = if deviation.abs() > cfg.route.lane_half_width() {
            Some(Verdict::LaneDeparture)
        } else if cfg.route.goal_reached(pose.x, pose.y) {
            Some(Verdict::GoalReached)
        } else if sim_time >= cfg.duration_s {
            Some(Verdict::Timeout)
        } else if cfg.wall_limit.is_some_and(|l| started.elapsed() >= l) {
            Some(Verdict::Stopped)
        } else {
            None
        };
        if let Some(v) = verdict {
            let detail = end_session(&mut writer, &mut reader, n, v).err().map(|e| e.to_string());
            return finish(v, detail, trace, steps, commands_sent, sensor_frames);
        }

        let cmd: AckermannCommand = follow_route(n, pose, speed, &cfg.route, &cfg.geometry, &cfg.follower);
        let sent = Message::Command(cmd)
            .encode_payload()
            .map_err(io::Error::other)
            .and_then(|p| write_frame(&mut writer, MsgType::AckermannCommand, n, &p).map_err(io::Error::other));
        if let Err(e) = sent {
            return finish(Verdict::Timeout, Some(e.to_string()), trace, steps, commands_sent, sensor_frames);
        }
        commands_sent += 1;
    }
}

fn end_session<R: Read, W: Write>(
    writer: &mut W,
    reader: &mut R,
    step: u64,
    verdict: Verdict,
) -> io::Result<()> {
    let payload = [verdict.end_reason() as u8];
    write_frame(writer, MsgType::SessionEnd, step, &payload).map_err(io::Error::other)?;
    // Drain until the bridge closes so neither side resets the connection.
    io::copy(reader, &mut io::sink())?;
    Ok(())
}

pub fn run_av_stream(stream: TcpStream, cfg: &AvClientConfig) -> io::Result<AvReport> {
    stream.set_nodelay(true)?;
    let reader = stream.try_clone()?;
    Ok(run_av_client(reader, &stream, cfg))
}
