use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("fixed step must be positive and finite, got {0}")]
pub struct InvalidStep(pub f64);

/// Simulation time derived from the step counter; it only moves on ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    step: u64,
    fixed_dt_ns: u64,
}

impl SimClock {
    pub fn new(fixed_dt_s: f64) -> Result<Self, InvalidStep> {
        if !fixed_dt_s.is_finite() || fixed_dt_s <= 0.0 {
            return Err(InvalidStep(fixed_dt_s));
        }
        let ns = (fixed_dt_s * 1e9).round() as u64;
        if ns == 0 {
            return Err(InvalidStep(fixed_dt_s));
        }
        Ok(Self {
            step: 0,
            fixed_dt_ns: ns,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn fixed_dt(&self) -> Duration {
        Duration::from_nanos(self.fixed_dt_ns)
    }

    pub fn fixed_dt_s(&self) -> f64 {
        self.fixed_dt_ns as f64 * 1e-9
    }

    pub fn sim_time(&self) -> Duration {
        Duration::from_nanos(self.step * self.fixed_dt_ns)
    }

    pub fn sim_time_s(&self) -> f64 {
        self.sim_time().as_secs_f64()
    }

    /// Advances one step in response to a tick and returns the new step.
    pub fn tick(&mut self) -> u64 {
        self.step += 1;
        self.step
    }
}
