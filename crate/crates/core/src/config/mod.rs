//! JSON configuration: sensor kits, vehicle parameters, topic maps,
//! controller settings, routes and scenarios. Every parser reports all
//! violations it finds.

mod controller;
pub(crate) mod json;
mod kit;
mod route;
mod scenario;
mod topics;
mod vehicle;

use std::fmt;
use std::path::Path;

pub use controller::{emit_controller, parse_controller};
pub use kit::{emit_sensor_kit, parse_sensor_kit, SensorKind, SensorKitConfig, SensorParams, SensorPose, SensorSpec};
pub use route::{emit_route, parse_route};
pub use scenario::{
    load_scenario, parse_scenario, Endpoints, InitialPose, LoadedScenario, ScenarioConfig,
};
pub use topics::{emit_topic_map, parse_topic_map, validate_topic_map};
pub use vehicle::{emit_vehicle_params, parse_vehicle_params, Dimensions, VehicleParameters};

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Syntax(String),
    Io(String),
    Missing,
    WrongType {
        expected: &'static str,
        found: &'static str,
    },
    NotPositive(f64),
    OutOfRange(String),
    DuplicateId(String),
    UnknownKind(String),
    MissingVehicleStatus,
    UnmappedSensor(String),
    OrphanEntry(String),
    Invalid(String),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::Syntax(e) => write!(f, "syntax error: {e}"),
            ViolationKind::Io(e) => write!(f, "cannot read file: {e}"),
            ViolationKind::Missing => f.write_str("missing required field"),
            ViolationKind::WrongType { expected, found } => {
                write!(f, "expected {expected}, found {found}")
            }
            ViolationKind::NotPositive(v) => write!(f, "must be positive, got {v}"),
            ViolationKind::OutOfRange(msg) => write!(f, "out of range: {msg}"),
            ViolationKind::DuplicateId(id) => write!(f, "duplicate sensor id '{id}'"),
            ViolationKind::UnknownKind(k) => write!(f, "unknown sensor kind '{k}'"),
            ViolationKind::MissingVehicleStatus => {
                f.write_str("kit has no vehicle_status sensor")
            }
            ViolationKind::UnmappedSensor(id) => write!(f, "sensor '{id}' has no topic mapping"),
            ViolationKind::OrphanEntry(src) => {
                write!(f, "mapping '{src}' does not belong to any kit sensor")
            }
            ViolationKind::Invalid(msg) => f.write_str(msg),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Dotted path into the document, e.g. `sensors[2].points_per_second`.
    pub path: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.kind)
        } else {
            write!(f, "{}: {}", self.path, self.kind)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<Violation>);

impl ConfigErrors {
    pub fn single(path: impl Into<String>, kind: ViolationKind) -> Self {
        ConfigErrors(vec![Violation {
            path: path.into(),
            kind,
        }])
    }

    /// Prefixes every path, typically with the file the errors came from.
    pub fn within(mut self, prefix: &str) -> Self {
        for v in &mut self.0 {
            v.path = if v.path.is_empty() {
                prefix.to_owned()
            } else {
                format!("{prefix}: {}", v.path)
            };
        }
        self
    }

    pub fn kinds(&self) -> impl Iterator<Item = &ViolationKind> {
        self.0.iter().map(|v| &v.kind)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

pub(crate) fn finish<T>(w: json::Walker, value: Option<T>) -> Result<T, ConfigErrors> {
    match value {
        Some(v) if w.errors.is_empty() => Ok(v),
        _ => {
            let mut errors = w.errors;
            if errors.is_empty() {
                errors.push(Violation {
                    path: String::new(),
                    kind: ViolationKind::Invalid("invalid document".into()),
                });
            }
            Err(ConfigErrors(errors))
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, ConfigErrors> {
    std::fs::read_to_string(path).map_err(|e| {
        ConfigErrors::single(path.display().to_string(), ViolationKind::Io(e.to_string()))
    })
}

/// Document kinds understood by [`validate_file`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigKind {
    SensorKit,
    Vehicle,
    TopicMap,
    Controller,
    Route,
    Scenario,
    SweepGrid,
}

impl fmt::Display for ConfigKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigKind::SensorKit => "sensor kit",
            ConfigKind::Vehicle => "vehicle parameters",
            ConfigKind::TopicMap => "topic map",
            ConfigKind::Controller => "controller",
            ConfigKind::Route => "route",
            ConfigKind::Scenario => "scenario",
            ConfigKind::SweepGrid => "sweep grid",
        })
    }
}

/// Guesses the document kind from its top-level keys.
pub fn detect_kind(text: &str) -> Option<ConfigKind> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    let o = v.as_object()?;
    let has = |k: &str| o.contains_key(k);
    Some(if has("route") && has("sensor_kit") {
        ConfigKind::Scenario
    } else if has("sensors") {
        ConfigKind::SensorKit
    } else if has("wheelbase") {
        ConfigKind::Vehicle
    } else if has("topics") {
        ConfigKind::TopicMap
    } else if has("pid") || has("steering") {
        ConfigKind::Controller
    } else if has("centerline") {
        ConfigKind::Route
    } else if has("lidar_counts") || has("camera_counts") || has("release_kit") {
        ConfigKind::SweepGrid
    } else {
        return None;
    })
}

/// Parses and validates a single file of any kind. Scenarios are loaded
/// together with everything they reference.
pub fn validate_file(path: &Path) -> Result<ConfigKind, ConfigErrors> {
    let text = read_file(path)?;
    let name = path.display().to_string();
    let kind = detect_kind(&text).ok_or_else(|| {
        ConfigErrors::single(
            name.clone(),
            ViolationKind::Invalid("unrecognized configuration document".into()),
        )
    })?;
    let result = match kind {
        ConfigKind::SensorKit => parse_sensor_kit(&text).map(drop),
        ConfigKind::Vehicle => parse_vehicle_params(&text).map(drop),
        ConfigKind::TopicMap => parse_topic_map(&text).map(drop),
        ConfigKind::Controller => {
            parse_controller(&text, VehicleParameters::default().max_tire_angle).map(drop)
        }
        ConfigKind::Route => parse_route(&text).map(drop),
        ConfigKind::Scenario => return load_scenario(path).map(|_| kind),
        ConfigKind::SweepGrid => crate::bench::parse_grid(&text).map(drop),
    };
    result.map(|_| kind).map_err(|e| e.within(&name))
}
