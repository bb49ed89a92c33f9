use serde_json::{json, Value};

use super::json::{index, Walker};
use super::{finish, ConfigErrors, ViolationKind};
use crate::av::Route;

pub const DEFAULT_GOAL_TOLERANCE: f64 = 2.0;

pub(crate) fn route_from_value(w: &mut Walker, v: &Value) -> Option<Route> {
    let o = w.object(v, "")?;
    let centerline = w.field(o, "", "centerline").and_then(|c| {
        let rows = w.array(c, "centerline")?;
        let mut pts = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            pts.push(w.point(r, &index("centerline", i)));
        }
        pts.into_iter().collect::<Option<Vec<_>>>()
    });
    let half_width = w.positive(o, "", "lane_half_width");
    let speed = w.positive(o, "", "target_speed");
    let (goal, tolerance) = match o.get("goal") {
        None => (None, Some(DEFAULT_GOAL_TOLERANCE)),
        Some(g) => match w.object(g, "goal") {
            None => (None, None),
            Some(go) => {
                let point = w.field(go, "goal", "point").and_then(|p| w.point(p, "goal.point"));
                let tol = match go.get("tolerance") {
                    Some(_) => w.positive(go, "goal", "tolerance"),
                    None => Some(DEFAULT_GOAL_TOLERANCE),
                };
                (point, tol)
            }
        },
    };
    let centerline = centerline?;
    let goal = goal.or_else(|| centerline.last().copied());
    match Route::new(centerline, half_width?, speed?, goal?, tolerance?) {
        Ok(r) => Some(r),
        Err(e) => {
            w.push("centerline", ViolationKind::Invalid(e.to_string()));
            None
        }
    }
}

/// Centerline points are `[x, y]` pairs in the AV frame. The goal defaults
/// to the last centerline point.
pub fn parse_route(text: &str) -> Result<Route, ConfigErrors> {
    let mut w = Walker::default();
    let r = w.parse(text).and_then(|v| route_from_value(&mut w, &v));
    finish(w, r)
}

pub fn emit_route(r: &Route) -> String {
    let doc = json!({
        "centerline": r.centerline().iter().map(|(x, y)| json!([x, y])).collect::<Vec<_>>(),
        "lane_half_width": r.lane_half_width(),
        "target_speed": r.target_speed(),
        "goal": {"point": [r.goal().0, r.goal().1], "tolerance": r.goal_tolerance()},
    });
    serde_json::to_string_pretty(&doc).expect("route serializes")
}
