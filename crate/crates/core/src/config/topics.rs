use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::json::{index, join, Walker};
use super::kit::{SensorKind, SensorKitConfig};
use super::{finish, ConfigErrors, ViolationKind};
use crate::convert::{DeliveryClass, Destination, SplitTopics, TopicEntry, TopicMap};

fn delivery(w: &mut Walker, s: &str, path: &str) -> Option<DeliveryClass> {
    match s {
        "reliable" => Some(DeliveryClass::Reliable),
        "best_effort" => Some(DeliveryClass::BestEffort),
        other => {
            w.push(
                path,
                ViolationKind::Invalid(format!(
                    "delivery must be 'reliable' or 'best_effort', got '{other}'"
                )),
            );
            None
        }
    }
}

pub(crate) fn topics_from_value(w: &mut Walker, v: &Value) -> Option<TopicMap> {
    let o = w.object(v, "")?;
    let raw = w.field(o, "", "topics").and_then(|t| w.array(t, "topics"));
    let mut entries = Vec::new();
    for (i, e) in raw.map(Vec::as_slice).unwrap_or(&[]).iter().enumerate() {
        let path = index("topics", i);
        let Some(eo) = w.object(e, &path) else { continue };
        let source = w.str_field(eo, &path, "source");
        let destination = w.str_field(eo, &path, "destination");
        let class = match w.opt_str(eo, &path, "delivery") {
            Some(d) => delivery(w, d, &join(&path, "delivery")),
            None => Some(DeliveryClass::Reliable),
        };
        if let (Some(source), Some(destination), Some(class)) = (source, destination, class) {
            entries.push(TopicEntry {
                source: source.to_owned(),
                destination: Destination::parse(destination),
                delivery: class,
            });
        }
    }
    let split = match o.get("split_topics") {
        None => Some(SplitTopics::default()),
        Some(s) => w.object(s, "split_topics").and_then(|so| {
            let steering = w.str_field(so, "split_topics", "steering");
            let velocity = w.str_field(so, "split_topics", "velocity");
            let odometry = w.str_field(so, "split_topics", "odometry");
            Some(SplitTopics {
                steering: steering?.to_owned(),
                velocity: velocity?.to_owned(),
                odometry: odometry?.to_owned(),
            })
        }),
    }?;
    raw?;
    match TopicMap::new(entries, split) {
        Ok(map) => Some(map),
        Err(errs) => {
            for e in errs {
                w.push("topics", ViolationKind::Invalid(e.to_string()));
            }
            None
        }
    }
}

pub fn parse_topic_map(text: &str) -> Result<TopicMap, ConfigErrors> {
    let mut w = Walker::default();
    let map = w.parse(text).and_then(|v| topics_from_value(&mut w, &v));
    finish(w, map)
}

/// Every kit sensor must be mapped and every mapping must belong to a kit
/// sensor. The vehicle status must use the split marker and nothing else
/// may.
pub fn validate_topic_map(map: &TopicMap, kit: &SensorKitConfig) -> Result<(), ConfigErrors> {
    let mut w = Walker::default();
    let mut sources = BTreeSet::new();
    for s in &kit.sensors {
        let source = TopicMap::source_for_sensor(&s.id);
        match map.remap(&source) {
            Err(_) => w.push(source.clone(), ViolationKind::UnmappedSensor(s.id.clone())),
            Ok(r) => {
                let is_status = s.kind() == SensorKind::VehicleStatus;
                let is_split = *r.destination == Destination::Split;
                if is_status != is_split {
                    w.push(
                        source.clone(),
                        ViolationKind::Invalid(if is_status {
                            format!("vehicle status must map to '{}'", Destination::SPLIT_MARKER)
                        } else {
                            format!("only the vehicle status may map to '{}'", Destination::SPLIT_MARKER)
                        }),
                    );
                }
            }
        }
        sources.insert(source);
    }
    for e in map.entries() {
        if !sources.contains(&e.source) {
            w.push(e.source.clone(), ViolationKind::OrphanEntry(e.source.clone()));
        }
    }
    finish(w, Some(()))
}

pub fn emit_topic_map(map: &TopicMap) -> String {
    let topics: Vec<Value> = map
        .entries()
        .iter()
        .map(|e| {
            json!({
                "source": e.source,
                "destination": e.destination.as_str(),
                "delivery": match e.delivery {
                    DeliveryClass::Reliable => "reliable",
                    DeliveryClass::BestEffort => "best_effort",
                },
            })
        })
        .collect();
    let s = map.split_topics();
    let doc = json!({
        "topics": topics,
        "split_topics": {"steering": s.steering, "velocity": s.velocity, "odometry": s.odometry},
    });
    serde_json::to_string_pretty(&doc).expect("topic map serializes")
}
