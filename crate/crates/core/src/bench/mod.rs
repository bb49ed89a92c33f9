//! Latency, CPU and FPS instrumentation plus the configuration sweep.

mod cpu;
mod fps;
mod histogram;
mod latency;
mod sweep;

pub use cpu::{
    clock_ticks_per_second, cpu_stats, current_pid, current_tid, parse_stat_ticks, CpuSample,
    CpuSampler, CpuTarget, DEFAULT_INTERVAL,
};
pub use fps::{fps_counter, FpsResult, DEFAULT_WARMUP};
pub use histogram::{Histogram, DEFAULT_BIN_WIDTH_MS, DEFAULT_RANGE_MS};
pub use latency::{LatencyError, LatencyLog, LatencyRecord, LatencyRecorder};
pub use sweep::{
    bench_topics, emit_report, parse_grid, run_bench_config, run_sweep, BenchOptions, BenchReport,
    BenchSetup, SweepGrid, REPORT_HEADER,
};
