use crate::messages::{Odometry, SteeringReport, VehicleStatus, VelocityReport};

/// The AV stack wants steering and velocity as separate reports, and pose
/// plus twist summarized as one odometry message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleSplit {
    pub steering: SteeringReport,
    pub velocity: VelocityReport,
    pub odometry: Odometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatusField {
    Position,
    Velocity,
    SteeringTireAngle,
    Orientation,
    Accel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusRoute {
    SteeringReport,
    VelocityReport,
    Odometry,
}

/// Where each status field lands. Every field has exactly one home.
pub const STATUS_ROUTES: [(StatusField, StatusRoute); 5] = [
    (StatusField::Position, StatusRoute::Odometry),
    (StatusField::Velocity, StatusRoute::VelocityReport),
    (StatusField::SteeringTireAngle, StatusRoute::SteeringReport),
    (StatusField::Orientation, StatusRoute::Odometry),
    (StatusField::Accel, StatusRoute::Odometry),
];

/// Expects a status already in the AV frame. `heading_rate` follows the
/// kinematic bicycle relation `v * tan(delta) / wheelbase`.
pub fn split_vehicle_status(status: &VehicleStatus, wheelbase: f64) -> VehicleSplit {
    let heading_rate = status.velocity * status.steering_tire_angle.tan() / wheelbase;
    VehicleSplit {
        steering: SteeringReport {
            step: status.step,
            steering_tire_angle: status.steering_tire_angle,
        },
        velocity: VelocityReport {
            step: status.step,
            longitudinal_velocity: status.velocity,
            heading_rate,
        },
        odometry: Odometry {
            step: status.step,
            position: status.position,
            orientation: status.orientation,
            linear_velocity: status.velocity,
            yaw_rate: heading_rate,
            accel: status.accel,
        },
    }
}
