//! Ackermann command to simulator actuator conversion.

mod pid;
mod steer;

pub use pid::{PidGains, PidState};
pub use steer::SteerMap;

use thiserror::Error;

use crate::messages::{AckermannCommand, VehicleControl};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("non-finite controller input")]
    NonFiniteInput,
    #[error("PID gains must be finite and non-negative")]
    InvalidGains,
    #[error("malformed steering table: {0}")]
    MalformedSteerTable(String),
    #[error("deadband must lie in [0, 1)")]
    InvalidDeadband,
}

pub const DEFAULT_DEADBAND: f64 = 0.01;

/// Splits a signed effort into exclusive throttle and brake pedals.
pub fn arbitrate(u: f64, deadband: f64) -> (f64, f64) {
    let u = if u.is_nan() { 0.0 } else { u.clamp(-1.0, 1.0) };
    if u >= deadband && u > 0.0 {
        (u, 0.0)
    } else if u <= -deadband && u < 0.0 {
        (0.0, -u)
    } else {
        (0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SteeringMode {
    /// Tire angle mapped through the table, then mirrored into the
    /// simulator's right-positive steering convention.
    Mapped(SteerMap),
    /// Tire angle in radians written straight into the steer input, with no
    /// scaling and no sign adaptation. Only useful as a comparison baseline.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlParams {
    pub gains: PidGains,
    pub deadband: f64,
    /// Scale applied to `target_accel` and added to the PID effort.
    pub feedforward: f64,
    pub steering: SteeringMode,
}

impl ControlParams {
    pub fn tuned(max_tire_angle: f64) -> Result<Self, ControlError> {
        Ok(Self {
            gains: PidGains::TUNED,
            deadband: DEFAULT_DEADBAND,
            feedforward: 0.0,
            steering: SteeringMode::Mapped(SteerMap::linear(max_tire_angle)?),
        })
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        self.gains.validate()?;
        if !(0.0..1.0).contains(&self.deadband) {
            return Err(ControlError::InvalidDeadband);
        }
        if !self.feedforward.is_finite() {
            return Err(ControlError::NonFiniteInput);
        }
        Ok(())
    }
}

/// Simulator steer input for a tire angle given in the AV frame.
pub fn steer_command(mode: &SteeringMode, tire_angle: f64) -> f64 {
    match mode {
        SteeringMode::Mapped(map) => -map.map(tire_angle),
        SteeringMode::Raw => tire_angle.clamp(-1.0, 1.0),
    }
}

/// Composes the PID update, pedal arbitration and steering conversion. The
/// PID state is left untouched if the inputs are rejected.
pub fn ackermann_to_control(
    cmd: &AckermannCommand,
    current_speed: f64,
    pid: &mut PidState,
    params: &ControlParams,
    dt: f64,
) -> Result<VehicleControl, ControlError> {
    if !cmd.target_speed.is_finite()
        || !cmd.target_accel.is_finite()
        || !cmd.tire_angle.is_finite()
        || !current_speed.is_finite()
    {
        return Err(ControlError::NonFiniteInput);
    }
    let effort = pid.step(cmd.target_speed, current_speed, dt)?;
    let u = (effort + params.feedforward * cmd.target_accel).clamp(-1.0, 1.0);
    let (throttle, brake) = arbitrate(u, params.deadband);
    Ok(VehicleControl {
        step: cmd.step,
        throttle,
        brake,
        steer: steer_command(&params.steering, cmd.tire_angle),
    })
}

/// Owns the PID state of one control path.
#[derive(Debug, Clone)]
pub struct ControlConverter {
    params: ControlParams,
    pid: PidState,
}

impl ControlConverter {
    pub fn new(params: ControlParams) -> Result<Self, ControlError> {
        params.validate()?;
        let pid = PidState::new(params.gains);
        Ok(Self { params, pid })
    }

    pub fn convert(
        &mut self,
        cmd: &AckermannCommand,
        current_speed: f64,
        dt: f64,
    ) -> Result<VehicleControl, ControlError> {
        ackermann_to_control(cmd, current_speed, &mut self.pid, &self.params, dt)
    }

    pub fn pid(&self) -> &PidState {
        &self.pid
    }

    pub fn params(&self) -> &ControlParams {
        &self.params
    }
}
