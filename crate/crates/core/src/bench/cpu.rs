//! Periodic CPU sampling from `/proc` accounting. 100% equals one fully
//! busy core.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

pub const DEFAULT_INTERVAL: Duration = Duration::from_millis(200);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpuSample {
    /// Seconds since sampling started.
    pub wall_t: f64,
    /// `None` when the target vanished or accounting is unavailable.
    pub cpu_percent: Option<f64>,
}

/// What to account for. Thread ids may be registered after sampling starts.
#[derive(Debug, Clone)]
pub enum CpuTarget {
    Process(u32),
    Threads(Arc<Mutex<Vec<i32>>>),
}

pub fn current_pid() -> u32 {
    std::process::id()
}

/// Kernel thread id of the calling thread.
pub fn current_tid() -> i32 {
    // SAFETY: gettid has no preconditions.
    unsafe { libc::syscall(libc::SYS_gettid) as i32 }
}

pub fn clock_ticks_per_second() -> Option<f64> {
    // SAFETY: sysconf has no preconditions.
    let t = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    (t > 0).then_some(t as f64)
}

/// utime + stime in clock ticks from the contents of a `stat` file.
pub fn parse_stat_ticks(stat: &str) -> Option<u64> {
    // The command name may contain spaces and parentheses; fields resume
    // after the last ')'. utime and stime are fields 14 and 15.
    let rest = &stat[stat.rfind(')')? + 1..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let utime: u64 = fields.get(11)?.parse().ok()?;
    let stime: u64 = fields.get(12)?.parse().ok()?;
    Some(utime + stime)
}

fn stat_paths(target: &CpuTarget) -> Vec<PathBuf> {
    match target {
        CpuTarget::Process(pid) => vec![PathBuf::from(format!("/proc/{pid}/stat"))],
        CpuTarget::Threads(tids) => {
            let pid = current_pid();
            tids.lock()
                .unwrap_or_else(|p| p.into_inner())
                .iter()
                .map(|tid| PathBuf::from(format!("/proc/{pid}/task/{tid}/stat")))
                .collect()
        }
    }
}

fn read_ticks(path: &PathBuf) -> Option<u64> {
    parse_stat_ticks(&std::fs::read_to_string(path).ok()?)
}

pub struct CpuSampler {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<Vec<CpuSample>>,
}

impl CpuSampler {
    pub fn start(target: CpuTarget, interval: Duration) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = std::thread::spawn(move || {
            let mut samples = Vec::new();
            let Some(hz) = clock_ticks_per_second() else {
                return samples;
            };
            let t0 = Instant::now();
            let snapshot = |target: &CpuTarget| -> Vec<(PathBuf, Option<u64>)> {
                stat_paths(target)
                    .into_iter()
                    .map(|p| {
                        let t = read_ticks(&p);
                        (p, t)
                    })
                    .collect()
            };
            let mut prev = snapshot(&target);
            let mut prev_t = Instant::now();
            while !flag.load(Ordering::Relaxed) {
                std::thread::sleep(interval);
                let now = snapshot(&target);
                let now_t = Instant::now();
                let mut delta = 0u64;
                let mut present = false;
                for (path, ticks) in &now {
                    let Some(ticks) = ticks else { continue };
                    present = true;
                    let before = prev
                        .iter()
                        .find(|(p, _)| p == path)
                        .and_then(|(_, t)| *t)
                        .unwrap_or(*ticks);
                    delta += ticks.saturating_sub(before);
                }
                let dt = (now_t - prev_t).as_secs_f64();
                samples.push(CpuSample {
                    wall_t: (now_t - t0).as_secs_f64(),
                    cpu_percent: present.then(|| 100.0 * delta as f64 / hz / dt),
                });
                prev = now;
                prev_t = now_t;
            }
            samples
        });
        Self { stop, handle }
    }

    pub fn stop(self) -> Vec<CpuSample> {
        self.stop.store(true, Ordering::Relaxed);
        self.handle.join().unwrap_or_default()
    }
}

/// Mean and population standard deviation over present samples taken at or
/// after `from_t` seconds.
pub fn cpu_stats(samples: &[CpuSample], from_t: f64) -> Option<(f64, f64)> {
    let v: Vec<f64> = samples
        .iter()
        .filter(|s| s.wall_t >= from_t)
        .filter_map(|s| s.cpu_percent)
        .collect();
    if v.is_empty() {
        return None;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    Some((mean, var.sqrt()))
}
