use std::collections::{HashMap, HashSet};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyRecord {
    pub msg_id: u64,
    pub sensor_id: String,
    /// Monotonic nanoseconds.
    pub ingress_t: u64,
    pub egress_t: u64,
}

impl LatencyRecord {
    pub fn latency_ns(&self) -> u64 {
        self.egress_t - self.ingress_t
    }

    pub fn latency_ms(&self) -> f64 {
        self.latency_ns() as f64 / 1e6
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatencyError {
    #[error("message id {0} was already recorded")]
    DuplicateMsgId(u64),
    #[error("egress for message {msg_id} precedes its ingress")]
    EgressBeforeIngress { msg_id: u64 },
}

/// Pairs ingress and egress timestamps by message id. Appends only; all
/// aggregation happens after the run.
#[derive(Debug, Default)]
pub struct LatencyRecorder {
    pending: HashMap<u64, (String, u64)>,
    seen: HashSet<u64>,
    records: Vec<LatencyRecord>,
    orphans: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LatencyLog {
    pub records: Vec<LatencyRecord>,
    /// Egress events without a matching ingress.
    pub orphans: u64,
    /// Ingress events never forwarded.
    pub drops: u64,
}

impl LatencyRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_ingress(&mut self, msg_id: u64, sensor_id: &str, t: u64) -> Result<(), LatencyError> {
        if !self.seen.insert(msg_id) {
            return Err(LatencyError::DuplicateMsgId(msg_id));
        }
        self.pending.insert(msg_id, (sensor_id.to_owned(), t));
        Ok(())
    }

    /// Returns the completed record, or `None` for an orphan egress.
    pub fn record_egress(&mut self, msg_id: u64, t: u64) -> Result<Option<&LatencyRecord>, LatencyError> {
        let Some((sensor_id, ingress_t)) = self.pending.remove(&msg_id) else {
            self.orphans += 1;
            return Ok(None);
        };
        if t < ingress_t {
            self.pending.insert(msg_id, (sensor_id, ingress_t));
            return Err(LatencyError::EgressBeforeIngress { msg_id });
        }
        self.records.push(LatencyRecord {
            msg_id,
            sensor_id,
            ingress_t,
            egress_t: t,
        });
        Ok(self.records.last())
    }

    pub fn orphans(&self) -> u64 {
        self.orphans
    }

    pub fn finish(self) -> LatencyLog {
        LatencyLog {
            records: self.records,
            orphans: self.orphans,
            drops: self.pending.len() as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_by_id() {
        let mut r = LatencyRecorder::new();
        r.record_ingress(1, "lidar", 100).unwrap();
        let rec = r.record_egress(1, 1100).unwrap().unwrap();
        assert_eq!(rec.latency_ns(), 1000);
    }

    #[test]
    fn orphan_egress_is_counted() {
        let mut r = LatencyRecorder::new();
        assert_eq!(r.record_egress(9, 5).unwrap(), None);
        assert_eq!(r.orphans(), 1);
    }

    #[test]
    fn duplicate_id_is_an_error() {
        let mut r = LatencyRecorder::new();
        r.record_ingress(3, "a", 0).unwrap();
        assert_eq!(r.record_ingress(3, "a", 1), Err(LatencyError::DuplicateMsgId(3)));
        r.record_egress(3, 2).unwrap();
        assert_eq!(r.record_ingress(3, "a", 4), Err(LatencyError::DuplicateMsgId(3)));
    }

    #[test]
    fn unpaired_ingress_is_a_drop() {
        let mut r = LatencyRecorder::new();
        r.record_ingress(1, "a", 0).unwrap();
        r.record_ingress(2, "a", 0).unwrap();
        r.record_egress(2, 10).unwrap();
        let log = r.finish();
        assert_eq!((log.records.len(), log.drops, log.orphans), (1, 1, 0));
    }
}
