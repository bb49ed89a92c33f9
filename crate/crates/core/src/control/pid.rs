use serde::{Deserialize, Serialize};

use super::ControlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the accumulated error, in m/s * s.
    pub integral_limit: f64,
}

impl PidGains {
    /// Tuned against the mock vehicle on the 8.33 m/s straight. The integral
    /// bound must cover the steady-state drag throttle (`drag * v / a_max`
    /// divided by `ki`), which 2.0 does not for the default vehicle.
    pub const TUNED: PidGains = PidGains {
        kp: 0.35,
        ki: 0.10,
        kd: 0.01,
        integral_limit: 3.0,
    };

    /// Proportional-only low-gain set, kept for comparison runs. It settles
    /// well below the target speed on the default vehicle.
    pub const LEGACY_LOW_GAIN: PidGains = PidGains {
        kp: 0.05,
        ki: 0.0,
        kd: 0.0,
        integral_limit: 2.0,
    };

    pub fn validate(&self) -> Result<(), ControlError> {
        let finite = [self.kp, self.ki, self.kd, self.integral_limit]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.kp < 0.0 || self.ki < 0.0 || self.kd < 0.0 || self.integral_limit < 0.0
        {
            return Err(ControlError::InvalidGains);
        }
        Ok(())
    }
}

impl Default for PidGains {
    fn default() -> Self {
        Self::TUNED
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState {
    pub gains: PidGains,
    pub integral: f64,
    pub prev_error: f64,
}

impl PidState {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integral: 0.0,
            prev_error: 0.0,
        }
    }

    /// One discrete update on `error = target - current`. Returns the
    /// normalized effort in [-1, 1].
    pub fn step(&mut self, target: f64, current: f64, dt: f64) -> Result<f64, ControlError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(ControlError::NonPositiveDt(dt));
        }
        if !target.is_finite() || !current.is_finite() {
            return Err(ControlError::NonFiniteInput);
        }
        let g = self.gains;
        let error = target - current;
        self.integral = (self.integral + error * dt).clamp(-g.integral_limit, g.integral_limit);
        let derivative = (error - self.prev_error) / dt;
        self.prev_error = error;
        let u = g.kp * error + g.ki * self.integral + g.kd * derivative;
        Ok(u.clamp(-1.0, 1.0))
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_gives_zero_output() {
        let mut pid = PidState::new(PidGains::TUNED);
        assert_eq!(pid.step(3.0, 3.0, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn non_positive_dt_is_rejected() {
        let mut pid = PidState::new(PidGains::TUNED);
        assert_eq!(pid.step(1.0, 0.0, 0.0), Err(ControlError::NonPositiveDt(0.0)));
        assert!(pid.step(1.0, 0.0, -0.1).is_err());
        assert_eq!(pid, PidState::new(PidGains::TUNED));
    }

    #[test]
    fn integral_stays_bounded_under_saturation() {
        let mut pid = PidState::new(PidGains::TUNED);
        for _ in 0..10_000 {
            let u = pid.step(100.0, 0.0, 0.05).unwrap();
            assert!(u <= 1.0);
            assert!(pid.integral.abs() <= PidGains::TUNED.integral_limit);
        }
        for _ in 0..10_000 {
            pid.step(-100.0, 0.0, 0.05).unwrap();
            assert!(pid.integral.abs() <= PidGains::TUNED.integral_limit);
        }
    }

    #[test]
    fn proportional_term_sign() {
        let mut pid = PidState::new(PidGains { kd: 0.0, ..PidGains::TUNED });
        assert!(pid.step(8.33, 0.0, 0.05).unwrap() > 0.0);
        pid.reset();
        assert!(pid.step(0.0, 8.33, 0.05).unwrap() < 0.0);
    }
}
