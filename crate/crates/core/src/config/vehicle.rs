use serde_json::{json, Value};

use super::json::Walker;
use super::{finish, ConfigErrors, ViolationKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensions {
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParameters {
    /// m
    pub wheelbase: f64,
    /// rad, strictly below pi/2
    pub max_tire_angle: f64,
    /// m/s^2 at full throttle
    pub a_max: f64,
    /// m/s^2 at full brake
    pub b_max: f64,
    /// 1/s, linear speed-proportional drag
    pub drag: f64,
    /// rad/s slew limit of the tire angle
    pub max_steer_rate: f64,
    pub dimensions: Dimensions,
}

impl Default for VehicleParameters {
    /// Placeholder values for a small van.
    fn default() -> Self {
        Self {
            wheelbase: 2.4,
            max_tire_angle: 0.61,
            a_max: 3.0,
            b_max: 8.0,
            drag: 0.1,
            max_steer_rate: 1.0,
            dimensions: Dimensions {
                length: 4.9,
                width: 1.8,
            },
        }
    }
}

pub(crate) fn vehicle_from_value(w: &mut Walker, v: &Value) -> Option<VehicleParameters> {
    let o = w.object(v, "")?;
    let wheelbase = w.positive(o, "", "wheelbase");
    let max_tire_angle = w.positive(o, "", "max_tire_angle").and_then(|a| {
        if a < std::f64::consts::FRAC_PI_2 {
            Some(a)
        } else {
            w.push(
                "max_tire_angle",
                ViolationKind::OutOfRange(format!("{a} rad is not below pi/2")),
            );
            None
        }
    });
    let a_max = w.positive(o, "", "a_max");
    let b_max = w.positive(o, "", "b_max");
    let drag = w.positive(o, "", "drag");
    let max_steer_rate = match o.get("max_steer_rate") {
        Some(_) => w.positive(o, "", "max_steer_rate"),
        None => Some(VehicleParameters::default().max_steer_rate),
    };
    let dimensions = w.field(o, "", "dimensions").and_then(|d| {
        let d = w.object(d, "dimensions")?;
        let length = w.positive(d, "dimensions", "length");
        let width = w.positive(d, "dimensions", "width");
        Some(Dimensions {
            length: length?,
            width: width?,
        })
    });
    Some(VehicleParameters {
        wheelbase: wheelbase?,
        max_tire_angle: max_tire_angle?,
        a_max: a_max?,
        b_max: b_max?,
        drag: drag?,
        max_steer_rate: max_steer_rate?,
        dimensions: dimensions?,
    })
}

pub fn parse_vehicle_params(text: &str) -> Result<VehicleParameters, ConfigErrors> {
    let mut w = Walker::default();
    let p = w.parse(text).and_then(|v| vehicle_from_value(&mut w, &v));
    finish(w, p)
}

pub fn emit_vehicle_params(p: &VehicleParameters) -> String {
    let doc = json!({
        "wheelbase": p.wheelbase,
        "max_tire_angle": p.max_tire_angle,
        "a_max": p.a_max,
        "b_max": p.b_max,
        "drag": p.drag,
        "max_steer_rate": p.max_steer_rate,
        "dimensions": {"length": p.dimensions.length, "width": p.dimensions.width},
    });
    serde_json::to_string_pretty(&doc).expect("vehicle serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DEFAULT_FILE: &str = include_str!("../../../../configs/vehicles/van.json");

    #[test]
    fn default_file_matches_defaults() {
        assert_eq!(parse_vehicle_params(DEFAULT_FILE).unwrap(), VehicleParameters::default());
    }

    #[test]
    fn zero_wheelbase_is_rejected() {
        let mut v: Value = serde_json::from_str(DEFAULT_FILE).unwrap();
        v["wheelbase"] = json!(0.0);
        let err = parse_vehicle_params(&v.to_string()).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].path, "wheelbase");
        assert_eq!(err.0[0].kind, ViolationKind::NotPositive(0.0));
    }

    #[test]
    fn steep_tire_angle_is_out_of_range() {
        let mut v: Value = serde_json::from_str(DEFAULT_FILE).unwrap();
        v["max_tire_angle"] = json!(2.0);
        let err = parse_vehicle_params(&v.to_string()).unwrap_err();
        assert!(matches!(err.0[0].kind, ViolationKind::OutOfRange(_)));
    }

    #[test]
    fn every_missing_field_is_listed() {
        let err = parse_vehicle_params("{}").unwrap_err();
        assert_eq!(err.0.len(), 6);
    }

    proptest! {
        #[test]
        fn round_trip(
            vals in prop::array::uniform6(0.01f64..50.0),
            angle in 0.01f64..1.5,
        ) {
            let p = VehicleParameters {
                wheelbase: vals[0],
                max_tire_angle: angle,
                a_max: vals[1],
                b_max: vals[2],
                drag: vals[3],
                max_steer_rate: vals[4],
                dimensions: Dimensions { length: vals[5], width: vals[0] },
            };
            prop_assert_eq!(parse_vehicle_params(&emit_vehicle_params(&p)).unwrap(), p);
        }

        #[test]
        fn parsing_is_total(text in ".{0,120}") {
            let _ = parse_vehicle_params(&text);
        }
    }
}
