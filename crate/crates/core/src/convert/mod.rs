//! Simulator-to-AV data conventions.
//!
//! The simulator frame is x-forward, y-right, z-up (left-handed); the AV
//! frame is x-forward, y-left, z-up (right-handed). Positions flip y.
//! Rotations are pseudo-vectors under that reflection, so the x and z
//! components of axes and angular rates flip instead.

mod split;
mod topics;

pub use split::{split_vehicle_status, StatusField, StatusRoute, VehicleSplit, STATUS_ROUTES};
pub use topics::{DeliveryClass, Destination, Remap, SplitTopics, TopicEntry, TopicMap};

use thiserror::Error;

use crate::geom::{Quaternion, Vector3};
use crate::messages::{ImuSample, LidarPoint, PointCloud, VehicleStatus};

pub const UNIT_QUATERNION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvertError {
    #[error("quaternion norm {norm} is not unit")]
    NonUnitQuaternion { norm: f64 },
    #[error("no mapping for topic {0:?}")]
    UnmappedTopic(String),
    #[error("destination {0:?} is mapped more than once")]
    DuplicateDestination(String),
    #[error("source {0:?} is mapped more than once")]
    DuplicateSource(String),
}

pub fn lh_to_rh_point(p: Vector3) -> Vector3 {
    Vector3::new(p.x, -p.y, p.z)
}

/// Applies the reflection to an axial vector such as an angular rate.
pub fn lh_to_rh_angular(w: Vector3) -> Vector3 {
    Vector3::new(-w.x, w.y, -w.z)
}

pub fn lh_to_rh_quaternion(q: Quaternion) -> Result<Quaternion, ConvertError> {
    let norm = q.norm();
    if !(norm - 1.0).abs().le(&UNIT_QUATERNION_TOLERANCE) {
        return Err(ConvertError::NonUnitQuaternion { norm });
    }
    Ok(Quaternion::new(q.w, -q.x, q.y, -q.z))
}

#[inline]
fn flip_point(p: &mut LidarPoint) {
    p.y = -p.y;
}

/// Converts in place; point order, count, intensity, id and step are kept.
pub fn convert_pointcloud(mut cloud: PointCloud) -> PointCloud {
    cloud.points.iter_mut().for_each(flip_point);
    cloud
}

pub fn convert_imu(mut sample: ImuSample) -> Result<ImuSample, ConvertError> {
    sample.orientation = lh_to_rh_quaternion(sample.orientation)?;
    sample.linear_accel = lh_to_rh_point(sample.linear_accel);
    sample.angular_vel = lh_to_rh_angular(sample.angular_vel);
    Ok(sample)
}

/// Position, heading and tire angle change sign; speed and acceleration are
/// longitudinal scalars and stay as they are.
pub fn convert_vehicle_status(mut status: VehicleStatus) -> Result<VehicleStatus, ConvertError> {
    status.orientation = lh_to_rh_quaternion(status.orientation)?;
    status.position = lh_to_rh_point(status.position);
    status.steering_tire_angle = -status.steering_tire_angle;
    Ok(status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn matmul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    const FLIP: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];

    #[test]
    fn point_examples() {
        assert_eq!(lh_to_rh_point(Vector3::new(1.0, 2.0, 3.0)), Vector3::new(1.0, -2.0, 3.0));
        assert_eq!(lh_to_rh_point(Vector3::ZERO), Vector3::ZERO);
    }

    #[test]
    fn identity_quaternion_is_fixed() {
        assert_eq!(
            lh_to_rh_quaternion(Quaternion::IDENTITY).unwrap(),
            Quaternion::IDENTITY
        );
    }

    #[test]
    fn left_yaw_becomes_negative_right_yaw() {
        let q = Quaternion::from_yaw(FRAC_PI_2);
        let converted = lh_to_rh_quaternion(q).unwrap();
        // Oracle: conjugating the rotation matrix by the reflection.
        let expected = matmul(matmul(FLIP, q.to_matrix()), FLIP);
        let got = converted.to_matrix();
        for i in 0..3 {
            for j in 0..3 {
                assert!((expected[i][j] - got[i][j]).abs() < 1e-12);
            }
        }
        assert!((converted.yaw() + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn quaternion_map_is_involution() {
        let q = Quaternion::from_euler(0.7, -0.3, 1.1);
        let back = lh_to_rh_quaternion(lh_to_rh_quaternion(q).unwrap()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn non_unit_quaternion_is_rejected() {
        let err = lh_to_rh_quaternion(Quaternion::new(1.0, 0.1, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, ConvertError::NonUnitQuaternion { .. }));
    }

    #[test]
    fn cloud_conversion_examples() {
        let empty = PointCloud { step: 3, sensor_id: "l".into(), points: vec![] };
        assert_eq!(convert_pointcloud(empty.clone()), empty);

        let pts = [(1.0, 2.0, 3.0, 0.1), (0.0, -1.0, 0.0, 0.5), (-4.0, 0.5, 2.0, 1.0)];
        let cloud = PointCloud {
            step: 7,
            sensor_id: "lidar_top".into(),
            points: pts
                .iter()
                .map(|&(x, y, z, i)| LidarPoint { x, y, z, intensity: i })
                .collect(),
        };
        let out = convert_pointcloud(cloud);
        assert_eq!(out.step, 7);
        assert_eq!(out.sensor_id, "lidar_top");
        for (p, &(x, y, z, i)) in out.points.iter().zip(&pts) {
            assert_eq!((p.x, p.y, p.z, p.intensity), (x, -y, z, i));
        }
    }

    #[test]
    fn imu_examples() {
        let zero = ImuSample { sensor_id: "imu".into(), ..Default::default() };
        assert_eq!(convert_imu(zero.clone()).unwrap(), zero);

        let up_y = ImuSample {
            linear_accel: Vector3::new(0.0, 2.5, 0.0),
            ..zero.clone()
        };
        assert_eq!(convert_imu(up_y).unwrap().linear_accel, Vector3::new(0.0, -2.5, 0.0));
    }

    #[test]
    fn integrated_rate_matches_converted_orientation() {
        // Constant body rate integrated in the simulator frame, then compared
        // against integrating the converted rate in the AV frame.
        let rate = Vector3::new(0.3, -0.8, 1.2);
        let dt = 0.01;
        let mut q_lh = Quaternion::from_euler(0.2, 0.1, -0.3);
        let mut q_rh = lh_to_rh_quaternion(q_lh).unwrap();
        let rate_rh = lh_to_rh_angular(rate);
        for _ in 0..100 {
            q_lh = (q_lh * Quaternion::from_axis_angle(rate, rate.norm() * dt)).normalized();
            q_rh = (q_rh * Quaternion::from_axis_angle(rate_rh, rate_rh.norm() * dt)).normalized();
        }
        let expected = lh_to_rh_quaternion(q_lh).unwrap();
        let diff = (expected.conjugate() * q_rh).normalized();
        let angle = 2.0 * diff.w.abs().min(1.0).acos();
        assert!(angle < 1e-3, "angle error {angle}");
    }

    #[test]
    fn status_conversion_flips_angular_fields() {
        let s = VehicleStatus {
            sensor_id: "vehicle_status".into(),
            position: Vector3::new(3.0, 4.0, 0.0),
            velocity: 5.0,
            steering_tire_angle: 0.2,
            orientation: Quaternion::from_yaw(0.5),
            accel: 1.0,
            step: 2,
        };
        let c = convert_vehicle_status(s).unwrap();
        assert_eq!(c.position, Vector3::new(3.0, -4.0, 0.0));
        assert_eq!(c.steering_tire_angle, -0.2);
        assert!((c.orientation.yaw() + 0.5).abs() < 1e-12);
        assert_eq!((c.velocity, c.accel, c.step), (5.0, 1.0, 2));
    }
}
