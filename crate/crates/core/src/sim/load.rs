use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::{SensorParams, SensorSpec};

use super::sensors::lidar_point_count;

/// Synthetic per-step cost standing in for rendering and ray casting in a
/// real simulator. Only the trend with sensor load matters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadModel {
    pub base_step_cost_us: f64,
    pub cost_per_lidar_point_us: f64,
    pub cost_per_pixel_us: f64,
}

impl LoadModel {
    pub const ZERO: LoadModel = LoadModel {
        base_step_cost_us: 0.0,
        cost_per_lidar_point_us: 0.0,
        cost_per_pixel_us: 0.0,
    };

    /// Roughly 30 FPS for a 1M pts/s LiDAR and a little under 100 FPS for
    /// an almost empty scene.
    pub const CALIBRATED: LoadModel = LoadModel {
        base_step_cost_us: 9_500.0,
        cost_per_lidar_point_us: 0.35,
        cost_per_pixel_us: 0.012,
    };

    pub fn step_cost(&self, specs: &[SensorSpec], dt: f64) -> Duration {
        let mut us = self.base_step_cost_us;
        for s in specs {
            us += match s.params {
                SensorParams::Lidar { points_per_second } => {
                    lidar_point_count(points_per_second, dt) as f64 * self.cost_per_lidar_point_us
                }
                SensorParams::Camera { width, height } => {
                    width as f64 * height as f64 * self.cost_per_pixel_us
                }
                _ => 0.0,
            };
        }
        Duration::from_secs_f64(us.max(0.0) / 1e6)
    }

    /// Spins for `cost` of wall time from `since`, counting work already
    /// done in the step.
    pub fn spin_until(since: Instant, cost: Duration) {
        while since.elapsed() < cost {
            std::hint::spin_loop();
        }
    }
}

impl Default for LoadModel {
    fn default() -> Self {
        Self::ZERO
    }
}
