//! Synthetic sensor output. Everything here is a pure function of
//! `(state, spec, step, seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{SensorParams, SensorSpec, VehicleParameters};
use crate::geom::{Quaternion, Vector3};
use crate::messages::{GnssFix, ImageFrame, ImuSample, LidarPoint, PointCloud, VehicleStatus};

use super::VehicleState;

pub const LIDAR_MAX_RANGE: f64 = 100.0;
const ELEVATION_MIN: f64 = -25.0 * std::f64::consts::PI / 180.0;
const ELEVATION_MAX: f64 = 15.0 * std::f64::consts::PI / 180.0;

const GNSS_ORIGIN_LAT: f64 = 48.0;
const GNSS_ORIGIN_LON: f64 = 11.0;
const EARTH_RADIUS: f64 = 6_378_137.0;
const GRAVITY: f64 = 9.81;

/// Axis-aligned box in the simulator world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub min: Vector3,
    pub max: Vector3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub ground_z: f64,
    pub obstacles: Vec<Obstacle>,
}

impl Default for World {
    /// Flat ground and a handful of parked-car-sized boxes.
    fn default() -> Self {
        let car = |x: f64, y: f64| Obstacle {
            min: Vector3::new(x - 2.2, y - 0.9, 0.0),
            max: Vector3::new(x + 2.2, y + 0.9, 1.6),
        };
        Self {
            ground_z: 0.0,
            obstacles: vec![
                car(15.0, 6.0),
                car(28.0, -7.0),
                car(45.0, 6.5),
                car(70.0, -6.0),
                Obstacle {
                    min: Vector3::new(20.0, 12.0, 0.0),
                    max: Vector3::new(60.0, 14.0, 8.0),
                },
            ],
        }
    }
}

fn ray_box(origin: Vector3, dir: Vector3, b: &Obstacle) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for (o, d, lo, hi) in [
        (origin.x, dir.x, b.min.x, b.max.x),
        (origin.y, dir.y, b.min.y, b.max.y),
        (origin.z, dir.z, b.min.z, b.max.z),
    ] {
        if d.abs() < 1e-12 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let inv = 1.0 / d;
            let (a, c) = ((lo - o) * inv, (hi - o) * inv);
            let (near, far) = if a < c { (a, c) } else { (c, a) };
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
    }
    Some(t0)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn stream_seed(seed: u64, sensor_id: &str, step: u64) -> u64 {
    let mut h = fnv1a(sensor_id.as_bytes()) ^ seed.rotate_left(17);
    h = h.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ step;
    h ^ (h >> 29)
}

/// Mounting pose of a sensor expressed in the world frame.
fn sensor_frame(state: &VehicleState, spec: &SensorSpec) -> (Vector3, [[f64; 3]; 3]) {
    let body = Quaternion::from_yaw(state.yaw);
    let mount = Quaternion::from_euler(spec.pose.yaw, spec.pose.pitch, spec.pose.roll);
    let origin = Vector3::new(state.x, state.y, 0.0)
        + body.rotate(Vector3::new(spec.pose.x, spec.pose.y, spec.pose.z));
    (origin, (body * mount).to_matrix())
}

pub fn lidar_point_count(points_per_second: f64, dt: f64) -> usize {
    (points_per_second * dt).round() as usize
}

/// Casts `round(points_per_second * dt)` seeded rays against the ground
/// plane and obstacles. Points are in the sensor frame; misses land at max
/// range with zero intensity so the count is exact.
pub fn generate_lidar(
    state: &VehicleState,
    spec: &SensorSpec,
    world: &World,
    step: u64,
    seed: u64,
    dt: f64,
) -> PointCloud {
    let SensorParams::Lidar { points_per_second } = spec.params else {
        panic!("generate_lidar called for non-lidar sensor {}", spec.id);
    };
    let n = lidar_point_count(points_per_second, dt);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &spec.id, step));
    let (origin, m) = sensor_frame(state, spec);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let az = rng.gen_range(0.0..std::f64::consts::TAU);
        let el = rng.gen_range(ELEVATION_MIN..ELEVATION_MAX);
        let (se, ce) = el.sin_cos();
        let (sa, ca) = az.sin_cos();
        let d = Vector3::new(ce * ca, ce * sa, se);
        let dw = Vector3::new(
            m[0][0] * d.x + m[0][1] * d.y + m[0][2] * d.z,
            m[1][0] * d.x + m[1][1] * d.y + m[1][2] * d.z,
            m[2][0] * d.x + m[2][1] * d.y + m[2][2] * d.z,
        );
        let mut range = LIDAR_MAX_RANGE;
        let mut reflectivity = 0.0;
        if dw.z < -1e-9 {
            let t = (world.ground_z - origin.z) / dw.z;
            if t > 0.0 && t < range {
                range = t;
                reflectivity = 0.35;
            }
        }
        for b in &world.obstacles {
            if let Some(t) = ray_box(origin, dw, b) {
                if t > 0.0 && t < range {
                    range = t;
                    reflectivity = 0.8;
                }
            }
        }
        let intensity = reflectivity * (1.0 - 0.5 * range / LIDAR_MAX_RANGE);
        points.push(LidarPoint {
            x: (d.x * range) as f32,
            y: (d.y * range) as f32,
            z: (d.z * range) as f32,
            intensity: intensity as f32,
        });
    }
    PointCloud {
        step,
        sensor_id: spec.id.clone(),
        points,
    }
}

/// Deterministic RGB test pattern; no rendering.
pub fn generate_camera(spec: &SensorSpec, step: u64, seed: u64) -> ImageFrame {
    let SensorParams::Camera { width, height } = spec.params else {
        panic!("generate_camera called for non-camera sensor {}", spec.id);
    };
    let row_len = width as usize * 3;
    let base = stream_seed(seed, &spec.id, 0);
    let row: Vec<u8> = (0..row_len)
        .map(|i| ((i as u64).wrapping_mul(31) ^ base) as u8)
        .collect();
    let mut data = Vec::with_capacity(row_len * height as usize);
    for y in 0..height as usize {
        let shift = (y as u64 + step.wrapping_mul(7)) as usize % row_len.max(1);
        data.extend_from_slice(&row[shift..]);
        data.extend_from_slice(&row[..shift]);
    }
    ImageFrame {
        step,
        sensor_id: spec.id.clone(),
        width,
        height,
        data,
    }
}

pub fn generate_imu(
    state: &VehicleState,
    spec: &SensorSpec,
    vehicle: &VehicleParameters,
    step: u64,
) -> ImuSample {
    let yaw_rate = state.yaw_rate(vehicle.wheelbase);
    ImuSample {
        step,
        sensor_id: spec.id.clone(),
        linear_accel: Vector3::new(state.accel, state.speed * yaw_rate, GRAVITY),
        angular_vel: Vector3::new(0.0, 0.0, yaw_rate),
        orientation: Quaternion::from_yaw(state.yaw),
    }
}

/// World x points east and world y (right-handed to the driver) south.
pub fn generate_gnss(state: &VehicleState, spec: &SensorSpec, step: u64) -> GnssFix {
    let north = -state.y;
    let east = state.x;
    let lat0 = GNSS_ORIGIN_LAT.to_radians();
    GnssFix {
        step,
        sensor_id: spec.id.clone(),
        latitude: GNSS_ORIGIN_LAT + (north / EARTH_RADIUS).to_degrees(),
        longitude: GNSS_ORIGIN_LON + (east / (EARTH_RADIUS * lat0.cos())).to_degrees(),
        altitude: spec.pose.z,
    }
}

pub fn generate_vehicle_status(state: &VehicleState, spec: &SensorSpec, step: u64) -> VehicleStatus {
    VehicleStatus {
        step,
        sensor_id: spec.id.clone(),
        position: Vector3::new(state.x, state.y, 0.0),
        velocity: state.speed,
        steering_tire_angle: state.steering_tire_angle,
        orientation: Quaternion::from_yaw(state.yaw),
        accel: state.accel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{SensorPose, SensorSpec};

    fn lidar(pps: f64) -> SensorSpec {
        SensorSpec {
            id: "lidar_top".into(),
            pose: SensorPose { z: 1.8, ..Default::default() },
            params: SensorParams::Lidar { points_per_second: pps },
        }
    }

    fn camera(width: u32, height: u32) -> SensorSpec {
        SensorSpec {
            id: "camera_front".into(),
            pose: SensorPose::default(),
            params: SensorParams::Camera { width, height },
        }
    }

    #[test]
    fn lidar_point_counts() {
        let w = World::default();
        let s = VehicleState::default();
        assert_eq!(generate_lidar(&s, &lidar(1000.0), &w, 0, 1, 0.05).points.len(), 50);
        assert_eq!(lidar_point_count(1_000_000.0, 0.05), 50_000);
        assert_eq!(lidar_point_count(500_000.0, 0.05), 25_000);
    }

    #[test]
    fn lidar_is_deterministic() {
        let w = World::default();
        let s = VehicleState::at_pose(3.0, -1.0, 0.2);
        let a = generate_lidar(&s, &lidar(20_000.0), &w, 17, 99, 0.05);
        let b = generate_lidar(&s, &lidar(20_000.0), &w, 17, 99, 0.05);
        assert_eq!(a, b);
        let c = generate_lidar(&s, &lidar(20_000.0), &w, 18, 99, 0.05);
        assert_ne!(a, c);
    }

    #[test]
    fn lidar_sees_ground_and_obstacles() {
        let w = World::default();
        let cloud = generate_lidar(&VehicleState::default(), &lidar(200_000.0), &w, 0, 5, 0.05);
        let ground = cloud
            .points
            .iter()
            .filter(|p| (p.z + 1.8).abs() < 1e-3 && p.intensity > 0.0)
            .count();
        let boxes = cloud
            .points
            .iter()
            .filter(|p| p.intensity > 0.0 && (p.z + 1.8).abs() >= 1e-3)
            .count();
        assert!(ground > 0 && boxes > 0);
        for p in &cloud.points {
            assert!((0.0..=1.0).contains(&p.intensity));
            assert!(p.x.is_finite() && p.y.is_finite() && p.z.is_finite());
        }
    }

    #[test]
    fn camera_payload_sizes() {
        assert_eq!(generate_camera(&camera(1280, 720), 0, 1).data.len(), 2_764_800);
        assert_eq!(generate_camera(&camera(1920, 1080), 0, 1).data.len(), 6_220_800);
    }

    #[test]
    fn camera_is_deterministic() {
        let a = generate_camera(&camera(64, 32), 5, 3);
        assert_eq!(a, generate_camera(&camera(64, 32), 5, 3));
        assert_eq!((a.step, a.sensor_id.as_str()), (5, "camera_front"));
    }
}
