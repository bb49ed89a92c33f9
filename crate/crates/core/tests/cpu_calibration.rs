//! Self-calibration of the CPU sampler against threads with known load.

use std::hint::black_box;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use simbridge::bench::{cpu_stats, current_tid, CpuSampler, CpuTarget};

static SERIAL: Mutex<()> = Mutex::new(());

const INTERVAL: Duration = Duration::from_millis(200);

/// Samples `n` threads running `work` for about two seconds and returns the
/// mean CPU percentage, skipping the first interval.
fn measure(n: usize, busy: bool) -> f64 {
    let _g = SERIAL.lock().unwrap_or_else(|p| p.into_inner());
    let tids = Arc::new(Mutex::new(Vec::new()));
    let stop = Arc::new(AtomicBool::new(false));
    let handles: Vec<_> = (0..n)
        .map(|_| {
            let tids = tids.clone();
            let stop = stop.clone();
            thread::spawn(move || {
                tids.lock().unwrap().push(current_tid());
                let mut x = 0u64;
                while !stop.load(Ordering::Relaxed) {
                    if busy {
                        x = black_box(x.wrapping_mul(6364136223846793005).wrapping_add(1));
                    } else {
                        thread::sleep(Duration::from_millis(20));
                    }
                }
                x
            })
        })
        .collect();
    while tids.lock().unwrap().len() < n {
        thread::yield_now();
    }
    let sampler = CpuSampler::start(CpuTarget::Threads(tids), INTERVAL);
    thread::sleep(Duration::from_millis(2300));
    let samples = sampler.stop();
    stop.store(true, Ordering::Relaxed);
    for h in handles {
        h.join().unwrap();
    }
    assert!(samples.iter().all(|s| s.cpu_percent.is_some_and(|c| c >= 0.0)));
    cpu_stats(&samples, 0.3).unwrap().0
}

fn cores() -> f64 {
    thread::available_parallelism().map_or(1, |n| n.get()).min(2) as f64
}

#[test]
fn idle_thread_is_near_zero() {
    let cpu = measure(1, false);
    assert!(cpu < 5.0, "idle thread measured {cpu:.1}%");
}

#[test]
fn one_busy_loop_is_one_core() {
    let cpu = measure(1, true);
    assert!((cpu - 100.0).abs() <= 10.0, "one busy loop measured {cpu:.1}%");
}

#[test]
fn two_busy_loops_use_two_cores_when_available() {
    let expected = 100.0 * cores();
    let cpu = measure(2, true);
    assert!((cpu - expected).abs() <= 20.0, "two busy loops measured {cpu:.1}%, expected {expected}");
}

#[test]
fn whole_process_is_sampled() {
    let _g = SERIAL.lock().unwrap_or_else(|p| p.into_inner());
    let sampler = CpuSampler::start(CpuTarget::Process(std::process::id()), Duration::from_millis(50));
    thread::sleep(Duration::from_millis(300));
    let samples = sampler.stop();
    assert!(!samples.is_empty());
    assert!(samples.iter().all(|s| s.cpu_percent.is_some()));
}
