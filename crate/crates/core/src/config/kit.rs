use std::collections::BTreeSet;

use serde_json::{json, Map, Value};

use super::json::{index, join, Walker};
use super::{finish, ConfigErrors, ViolationKind};

/// Mounting pose relative to the vehicle reference point, in the simulator
/// frame. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SensorKind {
    Lidar,
    Camera,
    Imu,
    Gnss,
    VehicleStatus,
}

impl SensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Lidar => "lidar",
            SensorKind::Camera => "camera",
            SensorKind::Imu => "imu",
            SensorKind::Gnss => "gnss",
            SensorKind::VehicleStatus => "vehicle_status",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lidar" => SensorKind::Lidar,
            "camera" => SensorKind::Camera,
            "imu" => SensorKind::Imu,
            "gnss" => SensorKind::Gnss,
            "vehicle_status" => SensorKind::VehicleStatus,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorParams {
    Lidar { points_per_second: f64 },
    Camera { width: u32, height: u32 },
    Imu,
    Gnss,
    VehicleStatus,
}

impl SensorParams {
    pub fn kind(&self) -> SensorKind {
        match self {
            SensorParams::Lidar { .. } => SensorKind::Lidar,
            SensorParams::Camera { .. } => SensorKind::Camera,
            SensorParams::Imu => SensorKind::Imu,
            SensorParams::Gnss => SensorKind::Gnss,
            SensorParams::VehicleStatus => SensorKind::VehicleStatus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub id: String,
    pub pose: SensorPose,
    pub params: SensorParams,
}

impl SensorSpec {
    pub fn kind(&self) -> SensorKind {
        self.params.kind()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorKitConfig {
    pub name: String,
    pub version: String,
    pub sensors: Vec<SensorSpec>,
}

impl SensorKitConfig {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.sensors.iter().map(|s| s.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.id == id)
    }

    pub fn count(&self, kind: SensorKind) -> usize {
        self.sensors.iter().filter(|s| s.kind() == kind).count()
    }
}

fn parse_pose(w: &mut Walker, v: &Value, path: &str) -> SensorPose {
    let Some(o) = w.object(v, path) else {
        return SensorPose::default();
    };
    let mut get = |k: &str| w.opt_f64(o, path, k).unwrap_or(0.0);
    SensorPose {
        x: get("x"),
        y: get("y"),
        z: get("z"),
        roll: get("roll"),
        pitch: get("pitch"),
        yaw: get("yaw"),
    }
}

fn parse_dimension(w: &mut Walker, o: &Map<String, Value>, path: &str, key: &str) -> Option<u32> {
    let v = w.u64_field(o, path, key)?;
    match u32::try_from(v) {
        Ok(0) => {
            w.push(join(path, key), ViolationKind::NotPositive(0.0));
            None
        }
        Ok(x) => Some(x),
        Err(_) => {
            w.push(join(path, key), ViolationKind::OutOfRange(format!("{v} exceeds u32")));
            None
        }
    }
}

fn parse_sensor(w: &mut Walker, v: &Value, path: &str) -> Option<SensorSpec> {
    let o = w.object(v, path)?;
    let id = w.str_field(o, path, "id");
    if let Some(id) = id {
        if id.is_empty() || id.len() > 255 {
            w.push(join(path, "id"), ViolationKind::Invalid("id must be 1..=255 bytes".into()));
        }
    }
    let kind = w.str_field(o, path, "kind").and_then(|k| {
        let parsed = SensorKind::parse(k);
        if parsed.is_none() {
            w.push(join(path, "kind"), ViolationKind::UnknownKind(k.to_owned()));
        }
        parsed
    });
    let pose = o
        .get("pose")
        .map(|p| parse_pose(w, p, &join(path, "pose")))
        .unwrap_or_default();
    let params = match kind? {
        SensorKind::Lidar => SensorParams::Lidar {
            points_per_second: w.positive(o, path, "points_per_second")?,
        },
        SensorKind::Camera => {
            let width = parse_dimension(w, o, path, "width");
            let height = parse_dimension(w, o, path, "height");
            SensorParams::Camera {
                width: width?,
                height: height?,
            }
        }
        SensorKind::Imu => SensorParams::Imu,
        SensorKind::Gnss => SensorParams::Gnss,
        SensorKind::VehicleStatus => SensorParams::VehicleStatus,
    };
    Some(SensorSpec {
        id: id?.to_owned(),
        pose,
        params,
    })
}

pub(crate) fn kit_from_value(w: &mut Walker, v: &Value) -> Option<SensorKitConfig> {
    let o = w.object(v, "")?;
    let name = w.opt_str(o, "", "name").unwrap_or("unnamed").to_owned();
    let version = w.opt_str(o, "", "version").unwrap_or("0").to_owned();
    let raw = match o.get("sensors") {
        Some(s) => w.array(s, "sensors").map(Vec::as_slice).unwrap_or(&[]),
        None => &[],
    };
    let mut sensors = Vec::with_capacity(raw.len());
    let mut seen = BTreeSet::new();
    let mut has_status = false;
    for (i, s) in raw.iter().enumerate() {
        let path = index("sensors", i);
        // Duplicate ids and the status requirement are checked even when
        // the rest of the entry is broken.
        if let Some(id) = s.get("id").and_then(Value::as_str) {
            if !seen.insert(id.to_owned()) {
                w.push(join(&path, "id"), ViolationKind::DuplicateId(id.to_owned()));
            }
        }
        if s.get("kind").and_then(Value::as_str) == Some("vehicle_status") {
            has_status = true;
        }
        if let Some(spec) = parse_sensor(w, s, &path) {
            sensors.push(spec);
        }
    }
    if !has_status {
        w.push("sensors", ViolationKind::MissingVehicleStatus);
    }
    Some(SensorKitConfig {
        name,
        version,
        sensors,
    })
}

pub fn parse_sensor_kit(text: &str) -> Result<SensorKitConfig, ConfigErrors> {
    let mut w = Walker::default();
    let kit = w.parse(text).and_then(|v| kit_from_value(&mut w, &v));
    finish(w, kit)
}

pub fn emit_sensor_kit(kit: &SensorKitConfig) -> String {
    let sensors: Vec<Value> = kit
        .sensors
        .iter()
        .map(|s| {
            let p = s.pose;
            let mut o = json!({
                "id": s.id,
                "kind": s.kind().as_str(),
                "pose": {"x": p.x, "y": p.y, "z": p.z, "roll": p.roll, "pitch": p.pitch, "yaw": p.yaw},
            });
            match s.params {
                SensorParams::Lidar { points_per_second } => {
                    o["points_per_second"] = json!(points_per_second);
                }
                SensorParams::Camera { width, height } => {
                    o["width"] = json!(width);
                    o["height"] = json!(height);
                }
                _ => {}
            }
            o
        })
        .collect();
    let doc = json!({"name": kit.name, "version": kit.version, "sensors": sensors});
    serde_json::to_string_pretty(&doc).expect("kit serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RELEASE: &str = include_str!("../../../../configs/kits/release.json");

    #[test]
    fn release_kit_is_valid() {
        let kit = parse_sensor_kit(RELEASE).unwrap();
        assert_eq!(kit.sensors.len(), 6);
        assert_eq!(kit.count(SensorKind::Lidar), 2);
        assert_eq!(kit.count(SensorKind::Camera), 1);
        let pps: Vec<f64> = kit
            .sensors
            .iter()
            .filter_map(|s| match s.params {
                SensorParams::Lidar { points_per_second } => Some(points_per_second),
                _ => None,
            })
            .collect();
        assert_eq!(pps, vec![500_000.0, 100_000.0]);
        assert!(kit.sensors.iter().any(|s| s.params
            == SensorParams::Camera {
                width: 1280,
                height: 720
            }));
    }

    #[test]
    fn duplicate_id_is_reported() {
        let text = r#"{"sensors": [
            {"id": "a", "kind": "imu"},
            {"id": "a", "kind": "gnss"},
            {"id": "s", "kind": "vehicle_status"}]}"#;
        let err = parse_sensor_kit(text).unwrap_err();
        assert!(err.kinds().any(|k| *k == ViolationKind::DuplicateId("a".into())));
    }

    #[test]
    fn empty_file_lacks_vehicle_status() {
        let err = parse_sensor_kit("").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].kind, ViolationKind::MissingVehicleStatus);
    }

    #[test]
    fn all_violations_are_collected() {
        let text = r#"{"sensors": [
            {"id": "l", "kind": "lidar", "points_per_second": 0},
            {"id": "c", "kind": "camera", "width": 640},
            {"id": "x", "kind": "radar"},
            {"kind": "imu"}]}"#;
        let err = parse_sensor_kit(text).unwrap_err();
        let kinds: Vec<_> = err.kinds().cloned().collect();
        assert!(kinds.contains(&ViolationKind::NotPositive(0.0)));
        assert!(kinds.contains(&ViolationKind::UnknownKind("radar".into())));
        assert!(kinds.contains(&ViolationKind::MissingVehicleStatus));
        assert!(err.0.iter().any(|v| v.path == "sensors[1].height" && v.kind == ViolationKind::Missing));
        assert!(err.0.iter().any(|v| v.path == "sensors[3].id" && v.kind == ViolationKind::Missing));
        assert_eq!(err.0.len(), 5);
    }

    fn arb_spec() -> impl Strategy<Value = SensorSpec> {
        let params = prop_oneof![
            (1.0f64..2e6).prop_map(|p| SensorParams::Lidar { points_per_second: p }),
            (1u32..4000, 1u32..3000).prop_map(|(w, h)| SensorParams::Camera { width: w, height: h }),
            Just(SensorParams::Imu),
            Just(SensorParams::Gnss),
        ];
        let pose = prop::array::uniform6(-5.0f64..5.0).prop_map(|a| SensorPose {
            x: a[0],
            y: a[1],
            z: a[2],
            roll: a[3],
            pitch: a[4],
            yaw: a[5],
        });
        ("[a-z_]{1,12}", pose, params).prop_map(|(id, pose, params)| SensorSpec { id, pose, params })
    }

    proptest! {
        #[test]
        fn emit_then_parse_round_trips(specs in prop::collection::vec(arb_spec(), 0..6), name in "[a-z ]{0,10}") {
            let mut sensors: Vec<SensorSpec> = Vec::new();
            for (i, mut s) in specs.into_iter().enumerate() {
                s.id = format!("{}_{i}", s.id);
                sensors.push(s);
            }
            sensors.push(SensorSpec {
                id: "vehicle_status".into(),
                pose: SensorPose::default(),
                params: SensorParams::VehicleStatus,
            });
            let kit = SensorKitConfig { name, version: "1.0".into(), sensors };
            let parsed = parse_sensor_kit(&emit_sensor_kit(&kit)).unwrap();
            prop_assert_eq!(parsed, kit);
        }

        #[test]
        fn parsing_is_total(text in ".{0,200}") {
            let _ = parse_sensor_kit(&text);
        }

        #[test]
        fn parsing_structured_noise_is_total(
            sensors in prop::collection::vec(
                prop::collection::btree_map(
                    prop::sample::select(vec!["id", "kind", "pose", "points_per_second", "width", "height"]),
                    prop_oneof![
                        Just(Value::Null),
                        any::<i64>().prop_map(Value::from),
                        any::<f64>().prop_map(Value::from),
                        prop::sample::select(vec!["lidar", "camera", "imu", "vehicle_status", "x"]).prop_map(Value::from),
                    ],
                    0..6,
                ),
                0..5,
            )
        ) {
            let doc = json!({"sensors": sensors});
            let _ = parse_sensor_kit(&doc.to_string());
        }
    }
}
