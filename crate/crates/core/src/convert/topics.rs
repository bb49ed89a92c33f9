use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ConvertError;

/// Delivery metadata. Both classes ride the same TCP link; the class is
/// carried through so per-class latency can be reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryClass {
    Reliable,
    BestEffort,
}

impl fmt::Display for DeliveryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeliveryClass::Reliable => "reliable",
            DeliveryClass::BestEffort => "best_effort",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Topic(String),
    /// Routed through the vehicle-status splitter.
    Split,
}

impl Destination {
    pub const SPLIT_MARKER: &'static str = "@split";

    pub fn parse(s: &str) -> Destination {
        if s == Self::SPLIT_MARKER {
            Destination::Split
        } else {
            Destination::Topic(s.to_owned())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Destination::Topic(t) => t,
            Destination::Split => Self::SPLIT_MARKER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicEntry {
    pub source: String,
    pub destination: Destination,
    pub delivery: DeliveryClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTopics {
    pub steering: String,
    pub velocity: String,
    pub odometry: String,
}

impl Default for SplitTopics {
    fn default() -> Self {
        Self {
            steering: "av/vehicle/status/steering_status".into(),
            velocity: "av/vehicle/status/velocity_status".into(),
            odometry: "av/localization/kinematic_state".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Remap<'a> {
    pub destination: &'a Destination,
    pub delivery: DeliveryClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicMap {
    entries: Vec<TopicEntry>,
    index: BTreeMap<String, usize>,
    split: SplitTopics,
}

impl TopicMap {
    pub const SOURCE_PREFIX: &'static str = "sim/";

    pub fn source_for_sensor(sensor_id: &str) -> String {
        format!("{}{}", Self::SOURCE_PREFIX, sensor_id)
    }

    /// Rejects duplicate sources and duplicate destinations (split outputs
    /// included). Reports every conflict.
    pub fn new(entries: Vec<TopicEntry>, split: SplitTopics) -> Result<Self, Vec<ConvertError>> {
        let mut errors = Vec::new();
        let mut index = BTreeMap::new();
        let mut destinations = HashSet::new();
        for name in [&split.steering, &split.velocity, &split.odometry] {
            if !destinations.insert(name.as_str()) {
                errors.push(ConvertError::DuplicateDestination(name.clone()));
            }
        }
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.source.clone(), i).is_some() {
                errors.push(ConvertError::DuplicateSource(e.source.clone()));
            }
            if !destinations.insert(e.destination.as_str()) {
                errors.push(ConvertError::DuplicateDestination(
                    e.destination.as_str().to_owned(),
                ));
            }
        }
        if errors.is_empty() {
            Ok(Self {
                entries,
                index,
                split,
            })
        } else {
            Err(errors)
        }
    }

    pub fn remap(&self, source: &str) -> Result<Remap<'_>, ConvertError> {
        let i = self
            .index
            .get(source)
            .ok_or_else(|| ConvertError::UnmappedTopic(source.to_owned()))?;
        let e = &self.entries[*i];
        Ok(Remap {
            destination: &e.destination,
            delivery: e.delivery,
        })
    }

    pub fn remap_sensor(&self, sensor_id: &str) -> Result<Remap<'_>, ConvertError> {
        self.remap(&Self::source_for_sensor(sensor_id))
    }

    pub fn entries(&self) -> &[TopicEntry] {
        &self.entries
    }

    pub fn split_topics(&self) -> &SplitTopics {
        &self.split
    }
}
