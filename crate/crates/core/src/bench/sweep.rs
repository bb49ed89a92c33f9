use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::{info, warn};
use serde_json::{Map, Value};

use crate::av::{AvClientConfig, PursuitParams, Route, VehicleGeometry};
use crate::bridge::{BridgeConfig, BridgeEnd};
use crate::config::json::{index, type_name, Walker};
use crate::config::{
    finish, parse_sensor_kit, ConfigErrors, SensorKind, SensorKitConfig, SensorParams, SensorPose,
    SensorSpec, VehicleParameters, ViolationKind,
};
use crate::control::ControlParams;
use crate::convert::{DeliveryClass, Destination, SplitTopics, TopicEntry, TopicMap};
use crate::protocol::TickLedger;
use crate::run::{run_closed_loop, thread_registry, ClosedLoopSetup};
use crate::sim::{LoadModel, SimServerConfig, VehicleState, World};

use super::{cpu_stats, fps_counter, CpuSampler, CpuTarget, FpsResult, Histogram, DEFAULT_INTERVAL};

const RELEASE_KIT: &str = include_str!("../../../../configs/kits/release.json");

/// One point of the benchmark grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BenchSetup {
    Sensors {
        lidars: u32,
        points_per_second: u64,
        cameras: u32,
        resolution: (u32, u32),
    },
    Release,
}

impl BenchSetup {
    pub fn lidars(count: u32, points_per_second: u64) -> Self {
        Self::Sensors {
            lidars: count,
            points_per_second,
            cameras: 0,
            resolution: (0, 0),
        }
    }

    pub fn cameras(count: u32, resolution: (u32, u32)) -> Self {
        Self::Sensors {
            lidars: 0,
            points_per_second: 0,
            cameras: count,
            resolution,
        }
    }

    /// The `sensors`, `count` and `density-or-resolution` report columns.
    pub fn columns(&self) -> (String, String, String) {
        match *self {
            Self::Release => ("release".into(), "6".into(), "500000;100000;1280x720".into()),
            Self::Sensors {
                lidars,
                points_per_second,
                cameras,
                resolution: (w, h),
            } => match (lidars, cameras) {
                (_, 0) => ("lidar".into(), lidars.to_string(), points_per_second.to_string()),
                (0, _) => ("camera".into(), cameras.to_string(), format!("{w}x{h}")),
                _ => (
                    "lidar+camera".into(),
                    format!("{lidars}+{cameras}"),
                    format!("{points_per_second};{w}x{h}"),
                ),
            },
        }
    }

    /// Sensor kind whose latency goes into the summary columns; `None`
    /// means all sensors.
    pub fn measured_kind(&self) -> Option<SensorKind> {
        match *self {
            Self::Sensors { lidars, cameras: 0, .. } if lidars > 0 => Some(SensorKind::Lidar),
            Self::Sensors { lidars: 0, cameras, .. } if cameras > 0 => Some(SensorKind::Camera),
            _ => None,
        }
    }

    pub fn kit(&self) -> SensorKitConfig {
        match *self {
            Self::Release => parse_sensor_kit(RELEASE_KIT).expect("bundled release kit is valid"),
            Self::Sensors {
                lidars,
                points_per_second,
                cameras,
                resolution: (width, height),
            } => {
                let mut sensors = Vec::new();
                let pose = |i: u32, z: f64| SensorPose {
                    x: 1.0,
                    y: 0.0,
                    z,
                    roll: 0.0,
                    pitch: 0.0,
                    yaw: std::f64::consts::FRAC_PI_2 * i as f64,
                };
                for i in 0..lidars {
                    sensors.push(SensorSpec {
                        id: format!("lidar_{}", i + 1),
                        pose: pose(i, 2.0),
                        params: SensorParams::Lidar {
                            points_per_second: points_per_second as f64,
                        },
                    });
                }
                for i in 0..cameras {
                    sensors.push(SensorSpec {
                        id: format!("camera_{}", i + 1),
                        pose: pose(i, 1.6),
                        params: SensorParams::Camera { width, height },
                    });
                }
                for (id, params) in [
                    ("imu", SensorParams::Imu),
                    ("gnss", SensorParams::Gnss),
                    ("vehicle_status", SensorParams::VehicleStatus),
                ] {
                    sensors.push(SensorSpec {
                        id: id.into(),
                        pose: SensorPose::default(),
                        params,
                    });
                }
                SensorKitConfig {
                    name: "bench".into(),
                    version: "1".into(),
                    sensors,
                }
            }
        }
    }
}

impl fmt::Display for BenchSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (s, c, d) = self.columns();
        write!(f, "{s} x{c} @ {d}")
    }
}

/// Topic map sending every sensor to `av/sensing/<kind>/<id>` and splitting
/// the status.
pub fn bench_topics(kit: &SensorKitConfig) -> TopicMap {
    let entries = kit
        .sensors
        .iter()
        .map(|s| {
            let (destination, delivery) = match s.kind() {
                SensorKind::VehicleStatus => (Destination::Split, DeliveryClass::Reliable),
                SensorKind::Lidar | SensorKind::Camera => (
                    Destination::Topic(format!("av/sensing/{}/{}", s.kind().as_str(), s.id)),
                    DeliveryClass::BestEffort,
                ),
                k => (
                    Destination::Topic(format!("av/sensing/{}/{}", k.as_str(), s.id)),
                    DeliveryClass::Reliable,
                ),
            };
            TopicEntry {
                source: TopicMap::source_for_sensor(&s.id),
                destination,
                delivery,
            }
        })
        .collect();
    TopicMap::new(entries, SplitTopics::default()).expect("generated topic map is consistent")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub duration: Duration,
    pub warmup: Duration,
    pub seed: u64,
    pub setups: Vec<BenchSetup>,
}

fn positive_ints(w: &mut Walker, obj: &Map<String, Value>, key: &str, max: u64) -> Vec<u64> {
    let Some(v) = obj.get(key) else {
        return Vec::new();
    };
    let Some(items) = w.array(v, key) else {
        return Vec::new();
    };
    items
        .iter()
        .enumerate()
        .filter_map(|(i, v)| match v.as_u64() {
            Some(n) if n > 0 && n <= max => Some(n),
            _ => {
                w.push(index(key, i), ViolationKind::OutOfRange(format!("expected an integer in 1..={max}")));
                None
            }
        })
        .collect()
}

fn grid_body(w: &mut Walker, text: &str) -> Option<SweepGrid> {
    let root = w.parse(text)?;
    let obj = w.object(&root, "")?;
    let duration = w.positive(obj, "", "duration_s");
    let warmup = w.opt_f64(obj, "", "warmup_s").unwrap_or(super::DEFAULT_WARMUP.as_secs_f64());
    if warmup < 0.0 {
        w.push("warmup_s", ViolationKind::NotPositive(warmup));
    }
    let seed = w.opt_u64(obj, "", "seed").unwrap_or(0);
    let lidar_counts = positive_ints(w, obj, "lidar_counts", 64);
    let densities = positive_ints(w, obj, "lidar_densities", u64::MAX);
    let camera_counts = positive_ints(w, obj, "camera_counts", 64);
    let mut resolutions = Vec::new();
    if let Some(items) = obj.get("camera_resolutions").and_then(|v| w.array(v, "camera_resolutions")) {
        for (i, v) in items.iter().enumerate() {
            let pair = v.as_array().filter(|a| a.len() == 2).and_then(|a| {
                let d = |x: &Value| x.as_u64().filter(|&n| n > 0 && n <= 16384);
                Some((d(&a[0])? as u32, d(&a[1])? as u32))
            });
            match pair {
                Some(p) => resolutions.push(p),
                None => w.push(
                    index("camera_resolutions", i),
                    ViolationKind::OutOfRange("expected [width, height] in pixels".into()),
                ),
            }
        }
    }
    let release = match obj.get("release_kit") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(v) => {
            w.push(
                "release_kit",
                ViolationKind::WrongType {
                    expected: "bool",
                    found: type_name(v),
                },
            );
            false
        }
    };
    let mut setups = Vec::new();
    for &c in &lidar_counts {
        for &d in &densities {
            setups.push(BenchSetup::lidars(c as u32, d));
        }
    }
    for &c in &camera_counts {
        for &r in &resolutions {
            setups.push(BenchSetup::cameras(c as u32, r));
        }
    }
    if release {
        setups.push(BenchSetup::Release);
    }
    if setups.is_empty() {
        w.push("", ViolationKind::Invalid("grid expands to no configurations".into()));
    }
    Some(SweepGrid {
        duration: Duration::from_secs_f64(duration?),
        warmup: Duration::from_secs_f64(warmup.max(0.0)),
        seed,
        setups,
    })
}

pub fn parse_grid(text: &str) -> Result<SweepGrid, ConfigErrors> {
    let mut w = Walker::default();
    let grid = grid_body(&mut w, text);
    finish(w, grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub setup: BenchSetup,
    /// Mean and standard deviation of bridge CPU, percent of one core.
    pub cpu: Option<(f64, f64)>,
    pub fps: FpsResult,
    /// Per sensor kind, after warm-up.
    pub latency: BTreeMap<&'static str, Histogram>,
    /// The sensor kind named by the setup, or all sensors.
    pub summary_latency: Histogram,
    pub ticks: u64,
    pub drops: u64,
    pub error: Option<String>,
}

impl BenchReport {
    fn failed(setup: BenchSetup, error: String) -> Self {
        Self {
            setup,
            cpu: None,
            fps: FpsResult {
                fps: 0.0,
                ticks: 0,
                window: Duration::ZERO,
                stalled: true,
            },
            latency: BTreeMap::new(),
            summary_latency: Histogram::from_samples(&[]),
            ticks: 0,
            drops: 0,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub duration: Duration,
    pub warmup: Duration,
    pub seed: u64,
    pub load_model: LoadModel,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            duration: Duration::from_secs(30),
            warmup: super::DEFAULT_WARMUP,
            seed: 0,
            load_model: LoadModel::CALIBRATED,
        }
    }
}

fn bench_setup(setup: &BenchSetup, opts: &BenchOptions) -> ClosedLoopSetup {
    let kit = setup.kit();
    let vehicle = VehicleParameters::default();
    let fixed_dt = 0.05;
    let route = Route::new(vec![(0.0, 0.0), (5000.0, 0.0)], 3.0, 8.33, (5000.0, 0.0), 2.0)
        .expect("bench route is valid");
    ClosedLoopSetup {
        sim: SimServerConfig {
            kit: kit.clone(),
            vehicle: vehicle.clone(),
            world: World::default(),
            initial: VehicleState::default(),
            seed: opts.seed,
            fixed_dt,
            load_model: opts.load_model,
        },
        bridge: BridgeConfig {
            topics: bench_topics(&kit),
            kit,
            control: ControlParams::tuned(vehicle.max_tire_angle).expect("tuned gains are valid"),
            vehicle: vehicle.clone(),
            fixed_dt,
            step_deadline: TickLedger::DEFAULT_DEADLINE,
            record_sequence: false,
            thread_registry: Some(thread_registry()),
        },
        av: AvClientConfig {
            route,
            geometry: VehicleGeometry {
                wheelbase: vehicle.wheelbase,
                max_tire_angle: vehicle.max_tire_angle,
            },
            follower: PursuitParams::default(),
            fixed_dt,
            duration_s: f64::MAX,
            wall_limit: Some(opts.warmup + opts.duration),
        },
    }
}

/// Runs one configuration end to end and collects its metrics.
pub fn run_bench_config(setup: &BenchSetup, opts: &BenchOptions) -> BenchReport {
    let cl = bench_setup(setup, opts);
    let kit = cl.bridge.kit.clone();
    let registry = cl.bridge.thread_registry.clone().unwrap_or_else(thread_registry);
    let sampler = CpuSampler::start(CpuTarget::Threads(registry), DEFAULT_INTERVAL);
    let result = run_closed_loop(&cl);
    let samples = sampler.stop();
    let report = match result {
        Ok(r) => r,
        Err(e) => return BenchReport::failed(setup.clone(), e.to_string()),
    };
    let bridge = report.bridge;
    let error = match &bridge.end {
        BridgeEnd::Session { .. } => None,
        other => Some(format!("bridge ended with {other:?}")),
    };
    let fps = fps_counter(&bridge.tick_times, bridge.started, bridge.finished, opts.warmup);
    let warm_ns = opts.warmup.as_nanos() as u64;
    let mut by_kind: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    let mut summary = Vec::new();
    let wanted = setup.measured_kind();
    for r in bridge.latency.records.iter().filter(|r| r.ingress_t >= warm_ns) {
        let Some(kind) = kit.get(&r.sensor_id).map(|s| s.kind()) else {
            continue;
        };
        by_kind.entry(kind.as_str()).or_default().push(r.latency_ms());
        if wanted.is_none_or(|k| k == kind) {
            summary.push(r.latency_ms());
        }
    }
    // CPU sample times are relative to sampler start, which precedes the
    // bridge by the loopback setup time.
    let cpu = cpu_stats(&samples, opts.warmup.as_secs_f64());
    BenchReport {
        setup: setup.clone(),
        cpu,
        fps,
        latency: by_kind.iter().map(|(k, v)| (*k, Histogram::from_samples(v))).collect(),
        summary_latency: Histogram::from_samples(&summary),
        ticks: bridge.ticks,
        drops: bridge.latency.drops,
        error,
    }
}

/// Runs every grid point, recording failures and carrying on.
pub fn run_sweep(grid: &SweepGrid, load_model: LoadModel) -> Vec<BenchReport> {
    let opts = BenchOptions {
        duration: grid.duration,
        warmup: grid.warmup,
        seed: grid.seed,
        load_model,
    };
    grid.setups
        .iter()
        .enumerate()
        .map(|(i, s)| {
            info!("[{}/{}] {s}", i + 1, grid.setups.len());
            let r = run_bench_config(s, &opts);
            if let Some(e) = &r.error {
                warn!("{s}: {e}");
            }
            r
        })
        .collect()
}

pub const REPORT_HEADER: [&str; 8] = [
    "sensors",
    "count",
    "density-or-resolution",
    "MCPU",
    "DCPU",
    "AFPS",
    "lat_mean_ms",
    "lat_p99_ms",
];

fn slug(setup: &BenchSetup) -> String {
    let (s, c, d) = setup.columns();
    format!("{s}_{c}_{d}").replace(['+', ';'], "-")
}

/// Writes `report.csv` and one latency histogram SVG per configuration into
/// `dir`, returning every file written.
pub fn emit_report(reports: &[BenchReport], dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "no reports to emit"));
    }
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("report.csv");
    let mut out = csv::Writer::from_path(&csv_path)?;
    out.write_record(REPORT_HEADER)?;
    let mut written = vec![csv_path.clone()];
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_owned(), |x| format!("{x:.1}"));
    for r in reports {
        let (s, c, d) = r.setup.columns();
        let h = &r.summary_latency;
        let lat = |x: f64| if h.total == 0 { "NA".to_owned() } else { format!("{x:.3}") };
        out.write_record([
            s,
            c,
            d,
            opt(r.cpu.map(|c| c.0)),
            opt(r.cpu.map(|c| c.1)),
            format!("{:.1}", r.fps.fps),
            lat(h.mean),
            lat(h.p99),
        ])?;
        let svg = dir.join(format!("latency_{}.svg", slug(&r.setup)));
        std::fs::write(&svg, h.to_svg(&format!("bridge latency, {}", r.setup)))?;
        written.push(svg);
    }
    out.flush()?;
    Ok(written)
}
