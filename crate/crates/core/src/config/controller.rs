use serde_json::{json, Value};

use super::json::{index, join, Walker};
use super::{finish, ConfigErrors, ViolationKind};
use crate::control::{ControlParams, PidGains, SteerMap, SteeringMode, DEFAULT_DEADBAND};

fn gains(w: &mut Walker, v: &Value) -> Option<PidGains> {
    let o = w.object(v, "pid")?;
    let kp = w.f64_field(o, "pid", "kp");
    let ki = w.f64_field(o, "pid", "ki");
    let kd = w.f64_field(o, "pid", "kd");
    let limit = w
        .opt_f64(o, "pid", "integral_limit")
        .or(Some(PidGains::TUNED.integral_limit));
    let g = PidGains {
        kp: kp?,
        ki: ki?,
        kd: kd?,
        integral_limit: limit?,
    };
    if g.validate().is_err() {
        w.push("pid", ViolationKind::OutOfRange("gains must be non-negative".into()));
        return None;
    }
    Some(g)
}

fn steering(w: &mut Walker, v: &Value, max_tire_angle: f64) -> Option<SteeringMode> {
    let o = w.object(v, "steering")?;
    match w.str_field(o, "steering", "mode")? {
        "raw" => Some(SteeringMode::Raw),
        "mapped" => {
            let table = match o.get("table") {
                None => return Some(SteeringMode::Mapped(SteerMap::linear(max_tire_angle).ok()?)),
                Some(t) => {
                    let rows = w.array(t, "steering.table")?;
                    let mut table = Vec::with_capacity(rows.len());
                    for (i, r) in rows.iter().enumerate() {
                        table.push(w.point(r, &index("steering.table", i)));
                    }
                    table.into_iter().collect::<Option<Vec<_>>>()?
                }
            };
            match SteerMap::new(max_tire_angle, table) {
                Ok(m) => Some(SteeringMode::Mapped(m)),
                Err(e) => {
                    w.push("steering.table", ViolationKind::Invalid(e.to_string()));
                    None
                }
            }
        }
        other => {
            w.push(
                join("steering", "mode"),
                ViolationKind::Invalid(format!("mode must be 'mapped' or 'raw', got '{other}'")),
            );
            None
        }
    }
}

pub(crate) fn controller_from_value(
    w: &mut Walker,
    v: &Value,
    max_tire_angle: f64,
) -> Option<ControlParams> {
    let o = w.object(v, "")?;
    let gains = match o.get("pid") {
        Some(p) => gains(w, p),
        None => Some(PidGains::TUNED),
    };
    let deadband = w.opt_f64(o, "", "deadband").unwrap_or(DEFAULT_DEADBAND);
    if !(0.0..1.0).contains(&deadband) {
        w.push("deadband", ViolationKind::OutOfRange("deadband must lie in [0, 1)".into()));
    }
    let feedforward = w.opt_f64(o, "", "feedforward").unwrap_or(0.0);
    let steering = match o.get("steering") {
        Some(s) => steering(w, s, max_tire_angle),
        None => SteerMap::linear(max_tire_angle).ok().map(SteeringMode::Mapped),
    };
    Some(ControlParams {
        gains: gains?,
        deadband,
        feedforward,
        steering: steering?,
    })
}

/// `max_tire_angle` comes from the vehicle; an explicit steer table must
/// end there.
pub fn parse_controller(text: &str, max_tire_angle: f64) -> Result<ControlParams, ConfigErrors> {
    let mut w = Walker::default();
    let p = w
        .parse(text)
        .and_then(|v| controller_from_value(&mut w, &v, max_tire_angle));
    finish(w, p)
}

pub fn emit_controller(p: &ControlParams) -> String {
    let steering = match &p.steering {
        SteeringMode::Raw => json!({"mode": "raw"}),
        SteeringMode::Mapped(m) => json!({
            "mode": "mapped",
            "table": m.half_table().iter().map(|(a, s)| json!([a, s])).collect::<Vec<_>>(),
        }),
    };
    let doc = json!({
        "pid": p.gains,
        "deadband": p.deadband,
        "feedforward": p.feedforward,
        "steering": steering,
    });
    serde_json::to_string_pretty(&doc).expect("controller serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TUNED: &str = include_str!("../../../../configs/controllers/tuned.json");
    const RAW: &str = include_str!("../../../../configs/controllers/raw_steering.json");
    const LEGACY: &str = include_str!("../../../../configs/controllers/legacy_low_gain.json");

    #[test]
    fn fixtures_parse() {
        assert_eq!(parse_controller(TUNED, 0.61).unwrap(), ControlParams::tuned(0.61).unwrap());
        assert_eq!(parse_controller(RAW, 0.61).unwrap().steering, SteeringMode::Raw);
        assert_eq!(parse_controller(LEGACY, 0.61).unwrap().gains, PidGains::LEGACY_LOW_GAIN);
    }

    #[test]
    fn malformed_table_is_rejected() {
        let text = r#"{"steering": {"mode": "mapped", "table": [[0, 0], [0.3, 0.9], [0.2, 1.0]]}}"#;
        let err = parse_controller(text, 0.61).unwrap_err();
        assert_eq!(err.0[0].path, "steering.table");
        let text = r#"{"steering": {"mode": "mapped", "table": [[0, 0], [0.5, 1.0]]}}"#;
        assert!(parse_controller(text, 0.61).is_err());
    }

    #[test]
    fn round_trip() {
        for text in [TUNED, RAW, LEGACY] {
            let p = parse_controller(text, 0.61).unwrap();
            assert_eq!(parse_controller(&emit_controller(&p), 0.61).unwrap(), p);
        }
        let curved = r#"{"steering": {"mode": "mapped", "table": [[0, 0], [0.3, 0.4], [0.61, 1.0]]}}"#;
        let p = parse_controller(curved, 0.61).unwrap();
        assert_eq!(parse_controller(&emit_controller(&p), 0.61).unwrap(), p);
    }
}
