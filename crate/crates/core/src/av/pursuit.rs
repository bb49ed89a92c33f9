use crate::messages::AckermannCommand;

use super::route::{Pose2, Route};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuitParams {
    /// s; lookahead grows linearly with speed
    pub k_v: f64,
    pub l_min: f64,
    pub l_max: f64,
    /// m/s^2 used for the curvature speed cap
    pub lateral_accel_limit: f64,
    /// m of route ahead scanned for curvature
    pub preview: f64,
    /// m/s^2, bound on the reported target acceleration
    pub accel_limit: f64,
}

impl Default for PursuitParams {
    fn default() -> Self {
        Self {
            k_v: 0.8,
            l_min: 3.0,
            l_max: 15.0,
            lateral_accel_limit: 2.0,
            preview: 15.0,
            accel_limit: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleGeometry {
    pub wheelbase: f64,
    pub max_tire_angle: f64,
}

pub fn lookahead_distance(speed: f64, p: &PursuitParams) -> f64 {
    (p.k_v * speed).clamp(p.l_min, p.l_max)
}

/// Pure-pursuit tire angle towards `target`, clamped to the steering limit.
/// Positive means left.
pub fn pursuit_angle(pose: Pose2, target: (f64, f64), geometry: &VehicleGeometry) -> f64 {
    let (dx, dy) = (target.0 - pose.x, target.1 - pose.y);
    let ld = (dx * dx + dy * dy).sqrt();
    if ld < 1e-9 {
        return 0.0;
    }
    let alpha = dy.atan2(dx) - pose.yaw;
    (2.0 * geometry.wheelbase * alpha.sin() / ld)
        .atan()
        .clamp(-geometry.max_tire_angle, geometry.max_tire_angle)
}

/// Route target speed, capped so the lateral acceleration stays below the
/// limit on the sharpest curvature in the preview window.
pub fn target_speed(route: &Route, s: f64, p: &PursuitParams) -> f64 {
    let kappa = route.max_curvature(s, s + p.preview);
    let cap = if kappa > 1e-9 {
        (p.lateral_accel_limit / kappa).sqrt()
    } else {
        f64::INFINITY
    };
    route.target_speed().min(cap)
}

pub fn follow_route(
    step: u64,
    pose: Pose2,
    speed: f64,
    route: &Route,
    geometry: &VehicleGeometry,
    params: &PursuitParams,
) -> AckermannCommand {
    let proj = route.project(pose.x, pose.y);
    let ld = lookahead_distance(speed, params);
    let target = route.point_at(proj.s + ld);
    let v = target_speed(route, proj.s, params);
    AckermannCommand {
        step,
        target_speed: v,
        target_accel: (v - speed).clamp(-params.accel_limit, params.accel_limit),
        tire_angle: pursuit_angle(pose, target, geometry),
    }
}
