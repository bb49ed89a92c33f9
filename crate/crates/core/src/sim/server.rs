use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::time::Instant;

use log::{debug, warn};

use crate::config::{SensorKitConfig, SensorParams, VehicleParameters};
use crate::messages::{EndReason, Message, VehicleControl};
use crate::protocol::{read_frame, write_frame, MsgType, SimClock, DEFAULT_MAX_PAYLOAD};

use super::sensors::{
    generate_camera, generate_gnss, generate_imu, generate_lidar, generate_vehicle_status, World,
};
use super::{step_vehicle, LoadModel, VehicleState};

#[derive(Debug, Clone, PartialEq)]
pub struct SimServerConfig {
    pub kit: SensorKitConfig,
    pub vehicle: VehicleParameters,
    pub world: World,
    pub initial: VehicleState,
    pub seed: u64,
    pub fixed_dt: f64,
    pub load_model: LoadModel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEnd {
    Session { step: u64, reason: EndReason },
    ConnectionLost(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Completed steps, i.e. ticks applied.
    pub steps: u64,
    pub frames_sent: u64,
    pub controls_applied: u64,
    pub end: SimEnd,
    /// FNV-1a over every byte sent.
    pub stream_digest: u64,
    pub final_state: VehicleState,
}

struct DigestWriter<W> {
    inner: W,
    hash: u64,
}

impl<W: Write> Write for DigestWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        for b in &buf[..n] {
            self.hash = (self.hash ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
        Ok(n)
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Encoded sensor frames for one step, in kit order.
pub fn step_frames(
    cfg: &SimServerConfig,
    state: &VehicleState,
    step: u64,
) -> Vec<(MsgType, Vec<u8>)> {
    cfg.kit
        .sensors
        .iter()
        .map(|spec| {
            let msg = match spec.params {
                SensorParams::Lidar { .. } => Message::PointCloud(generate_lidar(
                    state,
                    spec,
                    &cfg.world,
                    step,
                    cfg.seed,
                    cfg.fixed_dt,
                )),
                SensorParams::Camera { .. } => Message::Image(generate_camera(spec, step, cfg.seed)),
                SensorParams::Imu => Message::Imu(generate_imu(state, spec, &cfg.vehicle, step)),
                SensorParams::Gnss => Message::Gnss(generate_gnss(state, spec, step)),
                SensorParams::VehicleStatus => {
                    Message::VehicleStatus(generate_vehicle_status(state, spec, step))
                }
            };
            let payload = msg.encode_payload().expect("sensor ids are validated by the kit");
            (msg.msg_type(), payload)
        })
        .collect()
}

/// Runs the lockstep loop on one connection: publish all frames of step n,
/// wait for `Tick(n)`, apply the latest control for n and advance.
pub fn serve<R: Read, W: Write>(reader: R, writer: W, cfg: &SimServerConfig) -> SimReport {
    let mut reader = BufReader::with_capacity(64 * 1024, reader);
    let mut writer = DigestWriter {
        inner: BufWriter::with_capacity(256 * 1024, writer),
        hash: 0xcbf2_9ce4_8422_2325,
    };
    let mut clock = SimClock::new(cfg.fixed_dt).expect("fixed_dt is validated by the scenario");
    let mut state = cfg.initial;
    let mut frames_sent = 0u64;
    let mut controls_applied = 0u64;

    let end = 'run: loop {
        let step = clock.step();
        let started = Instant::now();
        let frames = step_frames(cfg, &state, step);
        LoadModel::spin_until(started, cfg.load_model.step_cost(&cfg.kit.sensors, cfg.fixed_dt));
        for (t, payload) in &frames {
            if let Err(e) = write_frame(&mut writer, *t, step, payload) {
                break 'run SimEnd::ConnectionLost(e.to_string());
            }
            frames_sent += 1;
        }

        let mut control: Option<VehicleControl> = None;
        loop {
            let frame = match read_frame(&mut reader, DEFAULT_MAX_PAYLOAD) {
                Ok(Some(f)) => f,
                Ok(None) => break 'run SimEnd::ConnectionLost("bridge closed the connection".into()),
                Err(e) => break 'run SimEnd::ConnectionLost(e.to_string()),
            };
            match Message::from_frame(&frame) {
                Ok(Message::Control(c)) if c.step == step => control = Some(c),
                Ok(Message::Tick { step: n }) if n == step => break,
                Ok(Message::SessionEnd { step, reason }) => {
                    break 'run SimEnd::Session { step, reason };
                }
                Ok(other) => warn!("simulator ignoring {:?} at step {step}", other.msg_type()),
                Err(e) => warn!("simulator dropping malformed {:?}: {e}", frame.msg_type),
            }
        }

        let applied = control.unwrap_or(VehicleControl {
            step,
            ..Default::default()
        });
        if control.is_some() {
            controls_applied += 1;
        } else {
            debug!("no control for step {step}, coasting");
        }
        state = step_vehicle(&state, &applied, &cfg.vehicle, cfg.fixed_dt);
        clock.tick();
    };

    let _ = writer.flush();
    SimReport {
        steps: clock.step(),
        frames_sent,
        controls_applied,
        end,
        stream_digest: writer.hash,
        final_state: state,
    }
}

pub fn serve_stream(stream: TcpStream, cfg: &SimServerConfig) -> std::io::Result<SimReport> {
    stream.set_nodelay(true)?;
    let reader = stream.try_clone()?;
    let report = serve(reader, &stream, cfg);
    let _ = stream.shutdown(std::net::Shutdown::Both);
    Ok(report)
}

/// Accepts exactly one bridge connection and serves it.
pub fn run_sim_server(listener: TcpListener, cfg: &SimServerConfig) -> std::io::Result<SimReport> {
    let (stream, peer) = listener.accept()?;
    debug!("simulator accepted bridge at {peer}");
    serve_stream(stream, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{SensorPose, SensorSpec};
    use crate::protocol::{encode_frame, WireFrame};
    use std::io::Cursor;

    fn cfg() -> SimServerConfig {
        let spec = |id: &str, params| SensorSpec {
            id: id.into(),
            pose: SensorPose::default(),
            params,
        };
        SimServerConfig {
            kit: SensorKitConfig {
                name: "t".into(),
                version: "1".into(),
                sensors: vec![
                    spec("lidar", SensorParams::Lidar { points_per_second: 2000.0 }),
                    spec("imu", SensorParams::Imu),
                    spec("vehicle_status", SensorParams::VehicleStatus),
                ],
            },
            vehicle: VehicleParameters::default(),
            world: World::default(),
            initial: VehicleState::default(),
            seed: 7,
            fixed_dt: 0.05,
            load_model: LoadModel::ZERO,
        }
    }

    fn script(steps: u64, throttle: f64) -> Vec<u8> {
        let mut out = Vec::new();
        for n in 0..steps {
            let c = Message::Control(VehicleControl { step: n, throttle, brake: 0.0, steer: 0.0 });
            out.extend(c.to_frame().unwrap().encode().unwrap());
            out.extend(encode_frame(MsgType::Tick, n, &[]).unwrap());
        }
        out.extend(
            Message::SessionEnd { step: steps, reason: EndReason::Stopped }
                .to_frame()
                .unwrap()
                .encode()
                .unwrap(),
        );
        out
    }

    fn sent_frames(bytes: &[u8]) -> Vec<WireFrame> {
        let mut r = Cursor::new(bytes);
        std::iter::from_fn(|| read_frame(&mut r, DEFAULT_MAX_PAYLOAD).unwrap()).collect()
    }

    #[test]
    fn lockstep_counts() {
        let mut out = Vec::new();
        let report = serve(Cursor::new(script(10, 0.5)), &mut out, &cfg());
        assert_eq!(report.steps, 10);
        assert_eq!(report.controls_applied, 10);
        // Frames for steps 0..=10; step 10 is published before the end.
        assert_eq!(report.frames_sent, 33);
        assert_eq!(report.end, SimEnd::Session { step: 10, reason: EndReason::Stopped });
        let frames = sent_frames(&out);
        for n in 0..=10u64 {
            let tags: Vec<_> = frames[(3 * n) as usize..(3 * n + 3) as usize]
                .iter()
                .map(|f| (f.step, f.msg_type))
                .collect();
            assert_eq!(
                tags,
                vec![(n, MsgType::PointCloud), (n, MsgType::Imu), (n, MsgType::VehicleStatus)]
            );
        }
        assert!(report.final_state.speed > 0.0);
    }

    #[test]
    fn same_seed_same_bytes() {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let ra = serve(Cursor::new(script(20, 0.3)), &mut a, &cfg());
        let rb = serve(Cursor::new(script(20, 0.3)), &mut b, &cfg());
        assert_eq!(a, b);
        assert_eq!(ra.stream_digest, rb.stream_digest);
        let mut other = cfg();
        other.seed = 8;
        let mut c = Vec::new();
        serve(Cursor::new(script(20, 0.3)), &mut c, &other);
        assert_ne!(a, c);
    }

    #[test]
    fn vehicle_holds_still_without_tick() {
        // A control without the tick must not move the vehicle.
        let mut input = Vec::new();
        let c = Message::Control(VehicleControl { step: 0, throttle: 1.0, brake: 0.0, steer: 0.0 });
        input.extend(c.to_frame().unwrap().encode().unwrap());
        let mut out = Vec::new();
        let report = serve(Cursor::new(input), &mut out, &cfg());
        assert_eq!(report.steps, 0);
        assert_eq!(report.final_state, VehicleState::default());
        assert!(matches!(report.end, SimEnd::ConnectionLost(_)));
    }

    #[test]
    fn missing_control_coasts() {
        let mut input = encode_frame(MsgType::Tick, 0, &[]).unwrap();
        input.extend(
            Message::SessionEnd { step: 1, reason: EndReason::Stopped }.to_frame().unwrap().encode().unwrap(),
        );
        let report = serve(Cursor::new(input), &mut Vec::new(), &cfg());
        assert_eq!((report.steps, report.controls_applied), (1, 0));
    }
}
