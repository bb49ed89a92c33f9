use std::time::{Duration, Instant};

use log::warn;

pub const DEFAULT_WARMUP: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsResult {
    pub fps: f64,
    pub ticks: usize,
    pub window: Duration,
    pub stalled: bool,
}

/// Ticks per wall-clock second over `[start + warmup, end]`.
pub fn fps_counter(tick_times: &[Instant], start: Instant, end: Instant, warmup: Duration) -> FpsResult {
    let from = start + warmup;
    let window = end.saturating_duration_since(from);
    let ticks = tick_times.iter().filter(|t| **t >= from && **t <= end).count();
    let fps = if window.is_zero() {
        0.0
    } else {
        ticks as f64 / window.as_secs_f64()
    };
    let stalled = ticks == 0;
    if stalled {
        warn!("no ticks in a {:.1} s measurement window; the pipeline stalled", window.as_secs_f64());
    }
    FpsResult {
        fps,
        ticks,
        window,
        stalled,
    }
}
