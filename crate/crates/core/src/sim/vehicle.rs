use crate::config::VehicleParameters;
use crate::messages::VehicleControl;

/// Ego state in the simulator's left-handed world frame. Positive yaw and
/// positive tire angle both turn towards +y (to the right).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
    pub steering_tire_angle: f64,
    /// Longitudinal acceleration applied during the last step.
    pub accel: f64,
}

impl VehicleState {
    pub fn at_pose(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw,
            ..Default::default()
        }
    }

    pub fn yaw_rate(&self, wheelbase: f64) -> f64 {
        self.speed * self.steering_tire_angle.tan() / wheelbase
    }
}

fn sanitize(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(lo, hi)
    }
}

/// Kinematic bicycle step about the rear axle. The tire angle slews towards
/// `steer * max_tire_angle` at most `max_steer_rate * dt` per step, and the
/// pose is integrated along the exact arc of the resulting curvature.
pub fn step_vehicle(
    state: &VehicleState,
    control: &VehicleControl,
    params: &VehicleParameters,
    dt: f64,
) -> VehicleState {
    debug_assert!(dt > 0.0);
    let throttle = sanitize(control.throttle, 0.0, 1.0);
    let brake = sanitize(control.brake, 0.0, 1.0);
    let steer = sanitize(control.steer, -1.0, 1.0);

    let accel = params.a_max * throttle - params.b_max * brake - params.drag * state.speed;
    let speed = (state.speed + accel * dt).max(0.0);
    let applied_accel = (speed - state.speed) / dt;

    let target_angle = steer * params.max_tire_angle;
    let max_delta = params.max_steer_rate * dt;
    let angle = (state.steering_tire_angle
        + (target_angle - state.steering_tire_angle).clamp(-max_delta, max_delta))
    .clamp(-params.max_tire_angle, params.max_tire_angle);

    let curvature = angle.tan() / params.wheelbase;
    let ds = speed * dt;
    let dyaw = curvature * ds;
    let (x, y) = if dyaw.abs() < 1e-12 {
        (
            state.x + ds * state.yaw.cos(),
            state.y + ds * state.yaw.sin(),
        )
    } else {
        let yaw1 = state.yaw + dyaw;
        (
            state.x + (yaw1.sin() - state.yaw.sin()) / curvature,
            state.y + (state.yaw.cos() - yaw1.cos()) / curvature,
        )
    };

    VehicleState {
        x,
        y,
        yaw: crate::geom::wrap_angle(state.yaw + dyaw),
        speed,
        steering_tire_angle: angle,
        accel: applied_accel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> VehicleParameters {
        VehicleParameters::default()
    }

    fn control(throttle: f64, brake: f64, steer: f64) -> VehicleControl {
        VehicleControl {
            step: 0,
            throttle,
            brake,
            steer,
        }
    }

    #[test]
    fn zero_control_at_rest_stays_put() {
        let s = VehicleState::at_pose(1.0, 2.0, 0.3);
        let next = step_vehicle(&s, &control(0.0, 0.0, 0.0), &params(), 0.05);
        assert_eq!(next, s);
    }

    #[test]
    fn full_throttle_approaches_terminal_speed() {
        let p = params();
        let terminal = p.a_max / p.drag;
        let dt = 0.05;
        let mut s = VehicleState::default();
        let mut prev = 0.0;
        for n in 1..=4000 {
            s = step_vehicle(&s, &control(1.0, 0.0, 0.0), &p, dt);
            assert!(s.speed > prev);
            assert!(s.speed < terminal);
            prev = s.speed;
            if n == 200 {
                // Closed form of the continuous model after 10 s.
                let exact = terminal * (1.0 - (-p.drag * 10.0f64).exp());
                assert!((s.speed - exact).abs() / exact < 0.01);
            }
            assert!(s.y.abs() < 1e-12);
        }
        assert!((terminal - s.speed) / terminal < 1e-3);
    }

    #[test]
    fn constant_steer_traces_a_circle() {
        let p = params();
        let delta = 0.2;
        let radius = p.wheelbase / f64::tan(delta);
        // Settle the tire angle before measuring.
        let mut s = VehicleState {
            speed: 5.0,
            steering_tire_angle: delta,
            ..Default::default()
        };
        let hold = control(p.drag * 5.0 / p.a_max, 0.0, delta / p.max_tire_angle);
        let center = (s.x - radius * s.yaw.sin(), s.y + radius * s.yaw.cos());
        let dt = 0.05;
        let lap = 2.0 * std::f64::consts::PI * radius / 5.0;
        for _ in 0..(lap / dt).ceil() as usize {
            s = step_vehicle(&s, &hold, &p, dt);
            let r = ((s.x - center.0).powi(2) + (s.y - center.1).powi(2)).sqrt();
            assert!((r - radius).abs() / radius < 0.01, "r {r} vs {radius}");
        }
    }

    #[test]
    fn steering_slews_at_bounded_rate() {
        let p = params();
        let s = VehicleState::default();
        let next = step_vehicle(&s, &control(0.0, 0.0, 1.0), &p, 0.05);
        assert!((next.steering_tire_angle - p.max_steer_rate * 0.05).abs() < 1e-12);
    }

    #[test]
    fn braking_never_reverses() {
        let s = VehicleState { speed: 0.1, ..Default::default() };
        let next = step_vehicle(&s, &control(0.0, 1.0, 0.0), &params(), 0.05);
        assert_eq!(next.speed, 0.0);
    }
}
