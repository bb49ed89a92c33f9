//! Message bodies carried inside [`WireFrame`] payloads.
//!
//! Sensor payloads start with a length-prefixed name. On the simulator link
//! the name is the sensor id; on the AV link the bridge rewrites it to the
//! destination topic. All numbers are little-endian; point coordinates are
//! `f32`, everything else `f64`. The step index lives in the frame header.

use thiserror::Error;

use crate::geom::{Quaternion, Vector3};
use crate::protocol::{MsgType, WireFrame};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PayloadError {
    #[error("payload truncated while reading {0}")]
    Truncated(&'static str),
    #[error("name is not valid UTF-8")]
    InvalidUtf8,
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("image data length {actual} does not match {width}x{height}x3")]
    ImageSize { width: u32, height: u32, actual: usize },
    #[error("unknown session end reason {0}")]
    UnknownEndReason(u8),
    #[error("name longer than 65535 bytes")]
    NameTooLong,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LidarPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Unitless, in [0, 1].
    pub intensity: f32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub step: u64,
    pub sensor_id: String,
    pub points: Vec<LidarPoint>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageFrame {
    pub step: u64,
    pub sensor_id: String,
    pub width: u32,
    pub height: u32,
    /// Packed RGB, row-major.
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImuSample {
    pub step: u64,
    pub sensor_id: String,
    pub linear_accel: Vector3,
    pub angular_vel: Vector3,
    pub orientation: Quaternion,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GnssFix {
    pub step: u64,
    pub sensor_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VehicleStatus {
    pub step: u64,
    pub sensor_id: String,
    pub position: Vector3,
    /// Longitudinal, m/s.
    pub velocity: f64,
    pub steering_tire_angle: f64,
    pub orientation: Quaternion,
    pub accel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SteeringReport {
    pub step: u64,
    pub steering_tire_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityReport {
    pub step: u64,
    pub longitudinal_velocity: f64,
    pub heading_rate: f64,
}

/// Pose and twist composed from a vehicle status.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Odometry {
    pub step: u64,
    pub position: Vector3,
    pub orientation: Quaternion,
    pub linear_velocity: f64,
    pub yaw_rate: f64,
    pub accel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AckermannCommand {
    pub step: u64,
    pub target_speed: f64,
    pub target_accel: f64,
    pub tire_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleControl {
    pub step: u64,
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EndReason {
    GoalReached = 0,
    LaneDeparture = 1,
    Timeout = 2,
    Error = 3,
    Stopped = 4,
}

impl TryFrom<u8> for EndReason {
    type Error = PayloadError;
    fn try_from(v: u8) -> Result<Self, PayloadError> {
        Ok(match v {
            0 => EndReason::GoalReached,
            1 => EndReason::LaneDeparture,
            2 => EndReason::Timeout,
            3 => EndReason::Error,
            4 => EndReason::Stopped,
            other => return Err(PayloadError::UnknownEndReason(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Tick { step: u64 },
    StepEnd { step: u64 },
    SessionEnd { step: u64, reason: EndReason },
    PointCloud(PointCloud),
    Image(ImageFrame),
    Imu(ImuSample),
    Gnss(GnssFix),
    VehicleStatus(VehicleStatus),
    SteeringReport(SteeringReport),
    VelocityReport(VelocityReport),
    Odometry(Odometry),
    Command(AckermannCommand),
    Control(VehicleControl),
}

struct Writer(Vec<u8>);

impl Writer {
    fn with_capacity(n: usize) -> Self {
        Writer(Vec::with_capacity(n))
    }
    fn name(&mut self, s: &str) {
        let len = u16::try_from(s.len()).expect("names are validated to fit u16");
        self.0.extend_from_slice(&len.to_le_bytes());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn vec3(&mut self, v: Vector3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }
    fn quat(&mut self, q: Quaternion) {
        self.f64(q.w);
        self.f64(q.x);
        self.f64(q.y);
        self.f64(q.z);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], PayloadError> {
        let end = self.pos.checked_add(n).ok_or(PayloadError::Truncated(what))?;
        let s = self.buf.get(self.pos..end).ok_or(PayloadError::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }
    fn name(&mut self) -> Result<String, PayloadError> {
        let len = u16::from_le_bytes(self.take(2, "name length")?.try_into().unwrap()) as usize;
        let bytes = self.take(len, "name")?;
        std::str::from_utf8(bytes)
            .map(str::to_owned)
            .map_err(|_| PayloadError::InvalidUtf8)
    }
    fn f64(&mut self, what: &'static str) -> Result<f64, PayloadError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &'static str) -> Result<u32, PayloadError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u8(&mut self, what: &'static str) -> Result<u8, PayloadError> {
        Ok(self.take(1, what)?[0])
    }
    fn vec3(&mut self, what: &'static str) -> Result<Vector3, PayloadError> {
        Ok(Vector3::new(self.f64(what)?, self.f64(what)?, self.f64(what)?))
    }
    fn quat(&mut self, what: &'static str) -> Result<Quaternion, PayloadError> {
        Ok(Quaternion::new(
            self.f64(what)?,
            self.f64(what)?,
            self.f64(what)?,
            self.f64(what)?,
        ))
    }
    fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }
    fn finish(self) -> Result<(), PayloadError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(PayloadError::TrailingBytes(n)),
        }
    }
}

pub fn check_name(name: &str) -> Result<(), PayloadError> {
    if name.len() > u16::MAX as usize {
        Err(PayloadError::NameTooLong)
    } else {
        Ok(())
    }
}

/// Reads the leading name of a sensor payload without decoding the body.
pub fn peek_name(payload: &[u8]) -> Result<&str, PayloadError> {
    let mut r = Reader::new(payload);
    let len = u16::from_le_bytes(r.take(2, "name length")?.try_into().unwrap()) as usize;
    std::str::from_utf8(r.take(len, "name")?).map_err(|_| PayloadError::InvalidUtf8)
}

/// Replaces the leading name of a sensor payload, copying the body verbatim.
pub fn rename_payload(payload: &[u8], new_name: &str) -> Result<Vec<u8>, PayloadError> {
    check_name(new_name)?;
    let old = peek_name(payload)?;
    let body = &payload[2 + old.len()..];
    let mut w = Writer::with_capacity(2 + new_name.len() + body.len());
    w.name(new_name);
    w.0.extend_from_slice(body);
    Ok(w.0)
}

pub fn encode_point_cloud_payload(name: &str, points: &[LidarPoint]) -> Vec<u8> {
    let mut w = Writer::with_capacity(2 + name.len() + 4 + points.len() * 16);
    w.name(name);
    w.u32(points.len() as u32);
    for p in points {
        w.f32(p.x);
        w.f32(p.y);
        w.f32(p.z);
        w.f32(p.intensity);
    }
    w.0
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::Tick { .. } => MsgType::Tick,
            Message::StepEnd { .. } => MsgType::StepEnd,
            Message::SessionEnd { .. } => MsgType::SessionEnd,
            Message::PointCloud(_) => MsgType::PointCloud,
            Message::Image(_) => MsgType::Image,
            Message::Imu(_) => MsgType::Imu,
            Message::Gnss(_) => MsgType::Gnss,
            Message::VehicleStatus(_) => MsgType::VehicleStatus,
            Message::SteeringReport(_) => MsgType::SteeringReport,
            Message::VelocityReport(_) => MsgType::VelocityReport,
            Message::Odometry(_) => MsgType::Odometry,
            Message::Command(_) => MsgType::AckermannCommand,
            Message::Control(_) => MsgType::VehicleControl,
        }
    }

    pub fn step(&self) -> u64 {
        match self {
            Message::Tick { step } | Message::StepEnd { step } => *step,
            Message::SessionEnd { step, .. } => *step,
            Message::PointCloud(m) => m.step,
            Message::Image(m) => m.step,
            Message::Imu(m) => m.step,
            Message::Gnss(m) => m.step,
            Message::VehicleStatus(m) => m.step,
            Message::SteeringReport(m) => m.step,
            Message::VelocityReport(m) => m.step,
            Message::Odometry(m) => m.step,
            Message::Command(m) => m.step,
            Message::Control(m) => m.step,
        }
    }

    pub fn encode_payload(&self) -> Result<Vec<u8>, PayloadError> {
        let mut w = Writer::with_capacity(64);
        match self {
            Message::Tick { .. } | Message::StepEnd { .. } => {}
            Message::SessionEnd { reason, .. } => w.0.push(*reason as u8),
            Message::PointCloud(m) => {
                check_name(&m.sensor_id)?;
                return Ok(encode_point_cloud_payload(&m.sensor_id, &m.points));
            }
            Message::Image(m) => {
                check_name(&m.sensor_id)?;
                let mut w = Writer::with_capacity(2 + m.sensor_id.len() + 8 + m.data.len());
                w.name(&m.sensor_id);
                w.u32(m.width);
                w.u32(m.height);
                w.0.extend_from_slice(&m.data);
                return Ok(w.0);
            }
            Message::Imu(m) => {
                check_name(&m.sensor_id)?;
                w.name(&m.sensor_id);
                w.vec3(m.linear_accel);
                w.vec3(m.angular_vel);
                w.quat(m.orientation);
            }
            Message::Gnss(m) => {
                check_name(&m.sensor_id)?;
                w.name(&m.sensor_id);
                w.f64(m.latitude);
                w.f64(m.longitude);
                w.f64(m.altitude);
            }
            Message::VehicleStatus(m) => {
                check_name(&m.sensor_id)?;
                w.name(&m.sensor_id);
                w.vec3(m.position);
                w.f64(m.velocity);
                w.f64(m.steering_tire_angle);
                w.quat(m.orientation);
                w.f64(m.accel);
            }
            Message::SteeringReport(m) => w.f64(m.steering_tire_angle),
            Message::VelocityReport(m) => {
                w.f64(m.longitudinal_velocity);
                w.f64(m.heading_rate);
            }
            Message::Odometry(m) => {
                w.vec3(m.position);
                w.quat(m.orientation);
                w.f64(m.linear_velocity);
                w.f64(m.yaw_rate);
                w.f64(m.accel);
            }
            Message::Command(m) => {
                w.f64(m.target_speed);
                w.f64(m.target_accel);
                w.f64(m.tire_angle);
            }
            Message::Control(m) => {
                w.f64(m.throttle);
                w.f64(m.brake);
                w.f64(m.steer);
            }
        }
        Ok(w.0)
    }

    pub fn to_frame(&self) -> Result<WireFrame, PayloadError> {
        Ok(WireFrame::new(self.msg_type(), self.step(), self.encode_payload()?))
    }

    pub fn from_frame(frame: &WireFrame) -> Result<Message, PayloadError> {
        Self::decode(frame.msg_type, frame.step, &frame.payload)
    }

    pub fn decode(msg_type: MsgType, step: u64, payload: &[u8]) -> Result<Message, PayloadError> {
        let mut r = Reader::new(payload);
        let msg = match msg_type {
            MsgType::Tick => Message::Tick { step },
            MsgType::StepEnd => Message::StepEnd { step },
            MsgType::SessionEnd => Message::SessionEnd {
                step,
                reason: EndReason::try_from(r.u8("end reason")?)?,
            },
            MsgType::PointCloud => {
                let sensor_id = r.name()?;
                let n = r.u32("point count")? as usize;
                let raw = r.take(
                    n.checked_mul(16).ok_or(PayloadError::Truncated("points"))?,
                    "points",
                )?;
                let points = raw
                    .chunks_exact(16)
                    .map(|c| LidarPoint {
                        x: f32::from_le_bytes(c[0..4].try_into().unwrap()),
                        y: f32::from_le_bytes(c[4..8].try_into().unwrap()),
                        z: f32::from_le_bytes(c[8..12].try_into().unwrap()),
                        intensity: f32::from_le_bytes(c[12..16].try_into().unwrap()),
                    })
                    .collect();
                Message::PointCloud(PointCloud {
                    step,
                    sensor_id,
                    points,
                })
            }
            MsgType::Image => {
                let sensor_id = r.name()?;
                let width = r.u32("width")?;
                let height = r.u32("height")?;
                let data = r.rest().to_vec();
                if data.len() as u64 != width as u64 * height as u64 * 3 {
                    return Err(PayloadError::ImageSize {
                        width,
                        height,
                        actual: data.len(),
                    });
                }
                Message::Image(ImageFrame {
                    step,
                    sensor_id,
                    width,
                    height,
                    data,
                })
            }
            MsgType::Imu => Message::Imu(ImuSample {
                step,
                sensor_id: r.name()?,
                linear_accel: r.vec3("linear accel")?,
                angular_vel: r.vec3("angular velocity")?,
                orientation: r.quat("orientation")?,
            }),
            MsgType::Gnss => Message::Gnss(GnssFix {
                step,
                sensor_id: r.name()?,
                latitude: r.f64("latitude")?,
                longitude: r.f64("longitude")?,
                altitude: r.f64("altitude")?,
            }),
            MsgType::VehicleStatus => Message::VehicleStatus(VehicleStatus {
                step,
                sensor_id: r.name()?,
                position: r.vec3("position")?,
                velocity: r.f64("velocity")?,
                steering_tire_angle: r.f64("steering angle")?,
                orientation: r.quat("orientation")?,
                accel: r.f64("accel")?,
            }),
            MsgType::SteeringReport => Message::SteeringReport(SteeringReport {
                step,
                steering_tire_angle: r.f64("steering angle")?,
            }),
            MsgType::VelocityReport => Message::VelocityReport(VelocityReport {
                step,
                longitudinal_velocity: r.f64("velocity")?,
                heading_rate: r.f64("heading rate")?,
            }),
            MsgType::Odometry => Message::Odometry(Odometry {
                step,
                position: r.vec3("position")?,
                orientation: r.quat("orientation")?,
                linear_velocity: r.f64("velocity")?,
                yaw_rate: r.f64("yaw rate")?,
                accel: r.f64("accel")?,
            }),
            MsgType::AckermannCommand => Message::Command(AckermannCommand {
                step,
                target_speed: r.f64("target speed")?,
                target_accel: r.f64("target accel")?,
                tire_angle: r.f64("tire angle")?,
            }),
            MsgType::VehicleControl => Message::Control(VehicleControl {
                step,
                throttle: r.f64("throttle")?,
                brake: r.f64("brake")?,
                steer: r.f64("steer")?,
            }),
        };
        r.finish()?;
        Ok(msg)
    }
}
