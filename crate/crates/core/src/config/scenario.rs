use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{Map, Value};

use super::json::{join, Walker};
use super::{
    finish, parse_controller, parse_route, parse_sensor_kit, parse_topic_map,
    parse_vehicle_params, read_file, validate_topic_map, ConfigErrors, SensorKitConfig,
    VehicleParameters, Violation, ViolationKind,
};
use crate::av::{PursuitParams, Route};
use crate::control::ControlParams;
use crate::convert::TopicMap;
use crate::protocol::{DEFAULT_AV_PORT, DEFAULT_SIM_PORT};
use crate::sim::LoadModel;

/// Start pose in the AV frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitialPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoints {
    pub sim: SocketAddr,
    pub av: SocketAddr,
}

impl Default for Endpoints {
    fn default() -> Self {
        Self {
            sim: SocketAddr::from(([127, 0, 0, 1], DEFAULT_SIM_PORT)),
            av: SocketAddr::from(([127, 0, 0, 1], DEFAULT_AV_PORT)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    /// Referenced files, relative to the scenario file until loaded.
    pub route: PathBuf,
    pub sensor_kit: PathBuf,
    pub vehicle: PathBuf,
    pub topics: PathBuf,
    pub controller: PathBuf,
    pub initial_pose: InitialPose,
    pub seed: u64,
    /// Simulated seconds before the run ends with a timeout verdict.
    pub duration_s: f64,
    pub fixed_dt: f64,
    pub step_deadline: Duration,
    pub endpoints: Endpoints,
    pub load_model: LoadModel,
    pub follower: PursuitParams,
}

/// A scenario with every referenced file parsed and cross-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    pub route: Route,
    pub kit: SensorKitConfig,
    pub vehicle: VehicleParameters,
    pub topics: TopicMap,
    pub controller: ControlParams,
}

fn path_field(w: &mut Walker, o: &Map<String, Value>, key: &str) -> Option<PathBuf> {
    w.str_field(o, "", key).map(PathBuf::from)
}

fn load_model(w: &mut Walker, v: &Value) -> Option<LoadModel> {
    if let Some(s) = v.as_str() {
        return match s {
            "zero" => Some(LoadModel::ZERO),
            "calibrated" => Some(LoadModel::CALIBRATED),
            other => {
                w.push(
                    "load_model",
                    ViolationKind::Invalid(format!(
                        "expected 'zero', 'calibrated' or an object, got '{other}'"
                    )),
                );
                None
            }
        };
    }
    let o = w.object(v, "load_model")?;
    let mut cost = |k: &str| {
        let x = w.f64_field(o, "load_model", k)?;
        if x < 0.0 {
            w.push(join("load_model", k), ViolationKind::OutOfRange("must be >= 0".into()));
            return None;
        }
        Some(x)
    };
    let base = cost("base_step_cost_us");
    let lidar = cost("cost_per_lidar_point_us");
    let pixel = cost("cost_per_pixel_us");
    Some(LoadModel {
        base_step_cost_us: base?,
        cost_per_lidar_point_us: lidar?,
        cost_per_pixel_us: pixel?,
    })
}

fn follower(w: &mut Walker, v: &Value) -> Option<PursuitParams> {
    let o = w.object(v, "follower")?;
    let d = PursuitParams::default();
    let mut get = |k: &str, default: f64| match o.get(k) {
        Some(_) => w.positive(o, "follower", k),
        None => Some(default),
    };
    let p = PursuitParams {
        k_v: get("k_v", d.k_v)?,
        l_min: get("l_min", d.l_min)?,
        l_max: get("l_max", d.l_max)?,
        lateral_accel_limit: get("lateral_accel_limit", d.lateral_accel_limit)?,
        preview: get("preview", d.preview)?,
        accel_limit: get("accel_limit", d.accel_limit)?,
    };
    if p.l_min > p.l_max {
        w.push("follower", ViolationKind::OutOfRange("l_min exceeds l_max".into()));
        return None;
    }
    Some(p)
}

fn endpoint(w: &mut Walker, o: &Map<String, Value>, key: &str, default: SocketAddr) -> Option<SocketAddr> {
    let Some(s) = w.opt_str(o, "endpoints", key) else {
        return o.get(key).is_none().then_some(default);
    };
    match s.parse() {
        Ok(a) => Some(a),
        Err(_) => {
            w.push(
                join("endpoints", key),
                ViolationKind::Invalid(format!("'{s}' is not a socket address")),
            );
            None
        }
    }
}

pub(crate) fn scenario_from_value(w: &mut Walker, v: &Value) -> Option<ScenarioConfig> {
    let o = w.object(v, "")?;
    let name = w.opt_str(o, "", "name").unwrap_or("unnamed").to_owned();
    let route = path_field(w, o, "route");
    let sensor_kit = path_field(w, o, "sensor_kit");
    let vehicle = path_field(w, o, "vehicle");
    let topics = path_field(w, o, "topics");
    let controller = path_field(w, o, "controller");
    let initial_pose = match o.get("initial_pose") {
        None => Some(InitialPose::default()),
        Some(p) => w.object(p, "initial_pose").and_then(|po| {
            let x = w.f64_field(po, "initial_pose", "x");
            let y = w.f64_field(po, "initial_pose", "y");
            let yaw = w.opt_f64(po, "initial_pose", "yaw").unwrap_or(0.0);
            Some(InitialPose { x: x?, y: y?, yaw })
        }),
    };
    let seed = w.opt_u64(o, "", "seed").unwrap_or(0);
    let duration_s = w.positive(o, "", "duration_s");
    let fixed_dt = match o.get("fixed_dt") {
        Some(_) => w.positive(o, "", "fixed_dt"),
        None => Some(0.05),
    };
    let step_deadline = match o.get("step_deadline_ms") {
        Some(_) => w
            .positive(o, "", "step_deadline_ms")
            .map(|ms| Duration::from_secs_f64(ms / 1000.0)),
        None => Some(crate::protocol::TickLedger::DEFAULT_DEADLINE),
    };
    let endpoints = match o.get("endpoints") {
        None => Some(Endpoints::default()),
        Some(e) => w.object(e, "endpoints").and_then(|eo| {
            let d = Endpoints::default();
            let sim = endpoint(w, eo, "sim", d.sim);
            let av = endpoint(w, eo, "av", d.av);
            Some(Endpoints { sim: sim?, av: av? })
        }),
    };
    let load_model = match o.get("load_model") {
        None => Some(LoadModel::ZERO),
        Some(m) => load_model(w, m),
    };
    let follower = match o.get("follower") {
        None => Some(PursuitParams::default()),
        Some(f) => follower(w, f),
    };
    Some(ScenarioConfig {
        name,
        route: route?,
        sensor_kit: sensor_kit?,
        vehicle: vehicle?,
        topics: topics?,
        controller: controller?,
        initial_pose: initial_pose?,
        seed,
        duration_s: duration_s?,
        fixed_dt: fixed_dt?,
        step_deadline: step_deadline?,
        endpoints: endpoints?,
        load_model: load_model?,
        follower: follower?,
    })
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let mut w = Walker::default();
    let s = w.parse(text).and_then(|v| scenario_from_value(&mut w, &v));
    finish(w, s)
}

/// Loads a scenario and every file it references. Violations from all
/// files are reported together, prefixed with the offending file.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigErrors> {
    let text = read_file(path)?;
    let name = path.display().to_string();
    let mut config = parse_scenario(&text).map_err(|e| e.within(&name))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [
        &mut config.route,
        &mut config.sensor_kit,
        &mut config.vehicle,
        &mut config.topics,
        &mut config.controller,
    ] {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }

    let mut errors: Vec<Violation> = Vec::new();
    fn load<T>(
        errors: &mut Vec<Violation>,
        path: &Path,
        parse: impl FnOnce(&str) -> Result<T, ConfigErrors>,
    ) -> Option<T> {
        let result = read_file(path).and_then(|t| parse(&t).map_err(|e| e.within(&path.display().to_string())));
        match result {
            Ok(v) => Some(v),
            Err(e) => {
                errors.extend(e.0);
                None
            }
        }
    }
    let route = load(&mut errors, &config.route, parse_route);
    let kit = load(&mut errors, &config.sensor_kit, parse_sensor_kit);
    let vehicle = load(&mut errors, &config.vehicle, parse_vehicle_params);
    let topics = load(&mut errors, &config.topics, parse_topic_map);
    let max_angle = vehicle.map(|v| v.max_tire_angle).unwrap_or(VehicleParameters::default().max_tire_angle);
    let controller = load(&mut errors, &config.controller, |t| parse_controller(t, max_angle));
    if let (Some(t), Some(k)) = (&topics, &kit) {
        if let Err(e) = validate_topic_map(t, k) {
            errors.extend(e.within(&config.topics.display().to_string()).0);
        }
    }
    match (route, kit, vehicle, topics, controller) {
        (Some(route), Some(kit), Some(vehicle), Some(topics), Some(controller)) if errors.is_empty() => {
            Ok(LoadedScenario {
                config,
                route,
                kit,
                vehicle,
                topics,
                controller,
            })
        }
        _ => Err(ConfigErrors(errors)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn configs_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
    }

    #[test]
    fn fixture_scenarios_load() {
        for name in [
            "straight_8p33",
            "straight_8p33_legacy_pid",
            "three_sharp_turns",
            "three_sharp_turns_raw_steering",
        ] {
            let path = configs_dir().join("scenarios").join(format!("{name}.json"));
            let s = load_scenario(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.config.name, name);
            assert_eq!(s.config.fixed_dt, 0.05);
            assert_eq!(s.config.step_deadline, Duration::from_secs(5));
        }
    }

    #[test]
    fn missing_route_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let src = configs_dir().join("scenarios/straight_8p33.json");
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(src).unwrap()).unwrap();
        for k in ["sensor_kit", "vehicle", "topics", "controller"] {
            let abs = configs_dir().join("scenarios").join(v[k].as_str().unwrap());
            v[k] = Value::from(abs.display().to_string());
        }
        v["route"] = Value::from("does/not/exist.json");
        let path = dir.path().join("s.json");
        std::fs::write(&path, v.to_string()).unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(matches!(err.0[0].kind, ViolationKind::Io(_)));
    }

    #[test]
    fn scenario_field_errors_are_collected() {
        let err = parse_scenario(r#"{"route": "r.json", "duration_s": 0, "fixed_dt": -1,
            "endpoints": {"sim": "nowhere"}}"#)
        .unwrap_err();
        // Four missing references, two non-positive values, one bad address.
        assert_eq!(err.0.len(), 7, "{err}");
    }
}
