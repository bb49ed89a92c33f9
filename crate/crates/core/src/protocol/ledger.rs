//! Lockstep gating: a step is released only once every expected sensor has
//! delivered its frame for that step.

use std::collections::BTreeSet;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("expected sensor set is empty")]
    EmptySensorSet,
    #[error("step deadline must be positive")]
    ZeroDeadline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickDecision {
    /// Accepted; the step still waits for other sensors.
    NoTick,
    /// Accepted and completed the step. Carries the completed step index.
    Tick { step: u64 },
    /// Data for a step that already ticked. Dropped, ledger untouched.
    StaleData,
    /// Sensor is not part of the expected set.
    UnknownSensor,
    /// Sensor already reported for the current step.
    Duplicate,
    /// Data for a step that has not started yet (ordering violation).
    Ahead,
}

impl TickDecision {
    pub fn is_accepted(self) -> bool {
        matches!(self, TickDecision::NoTick | TickDecision::Tick { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickLedger {
    step: u64,
    expected: BTreeSet<String>,
    received: BTreeSet<String>,
    deadline: Duration,
    ticks: u64,
}

impl TickLedger {
    pub const DEFAULT_DEADLINE: Duration = Duration::from_secs(5);

    pub fn new<I, S>(sensor_ids: I, deadline: Duration) -> Result<Self, LedgerError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if deadline.is_zero() {
            return Err(LedgerError::ZeroDeadline);
        }
        let mut ledger = Self {
            step: 0,
            expected: BTreeSet::new(),
            received: BTreeSet::new(),
            deadline,
            ticks: 0,
        };
        ledger.register_expected(sensor_ids)?;
        Ok(ledger)
    }

    /// Replaces the expected set and clears anything received so far.
    pub fn register_expected<I, S>(&mut self, sensor_ids: I) -> Result<(), LedgerError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let expected: BTreeSet<String> = sensor_ids.into_iter().map(Into::into).collect();
        if expected.is_empty() {
            return Err(LedgerError::EmptySensorSet);
        }
        self.expected = expected;
        self.received.clear();
        Ok(())
    }

    pub fn on_sensor_arrival(&mut self, sensor_id: &str, step: u64) -> TickDecision {
        if !self.expected.contains(sensor_id) {
            return TickDecision::UnknownSensor;
        }
        if step < self.step {
            return TickDecision::StaleData;
        }
        if step > self.step {
            return TickDecision::Ahead;
        }
        if !self.received.insert(sensor_id.to_owned()) {
            return TickDecision::Duplicate;
        }
        if self.received.len() == self.expected.len() {
            let completed = self.step;
            self.step += 1;
            self.ticks += 1;
            self.received.clear();
            TickDecision::Tick { step: completed }
        } else {
            TickDecision::NoTick
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn expected(&self) -> &BTreeSet<String> {
        &self.expected
    }

    pub fn received(&self) -> &BTreeSet<String> {
        &self.received
    }

    pub fn missing(&self) -> BTreeSet<String> {
        self.expected.difference(&self.received).cloned().collect()
    }

    pub fn deadline(&self) -> Duration {
        self.deadline
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeoutReport {
    pub step: u64,
    pub missing: BTreeSet<String>,
    pub waited: Duration,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AwaitError {
    #[error("step {} timed out waiting for {:?}", .0.step, .0.missing)]
    Timeout(TimeoutReport),
    #[error("all arrival sources disconnected")]
    Disconnected,
    #[error("await deadline must be positive")]
    ZeroDeadline,
}

/// Arrival and tick events in the order the coordinator serialized them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeqEvent {
    Accepted { step: u64, sensor: String },
    Tick { step: u64 },
}

/// Verifies that nothing tagged with step `n + 1` was accepted before the
/// tick for step `n`. Returns the index of the first violating event.
pub fn check_ordering(log: &[SeqEvent]) -> Result<(), usize> {
    let mut next_open_step = 0u64;
    for (i, event) in log.iter().enumerate() {
        match event {
            SeqEvent::Accepted { step, .. } if *step != next_open_step => return Err(i),
            SeqEvent::Tick { step } if *step != next_open_step => return Err(i),
            SeqEvent::Tick { step } => next_open_step = step + 1,
            SeqEvent::Accepted { .. } => {}
        }
    }
    Ok(())
}

struct CoordState {
    ledger: TickLedger,
    log: Vec<SeqEvent>,
    record_log: bool,
}

/// Serialization point shared by every reader. Cloneable; all clones feed
/// the same ledger.
#[derive(Clone)]
pub struct TickCoordinator {
    state: Arc<Mutex<CoordState>>,
    ticks: Sender<u64>,
}

/// Receiving half, owned by the task that drives the step loop.
pub struct TickWaiter {
    state: Arc<Mutex<CoordState>>,
    ticks: Receiver<u64>,
}

fn lock(state: &Mutex<CoordState>) -> MutexGuard<'_, CoordState> {
    state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl TickCoordinator {
    pub fn new(ledger: TickLedger, record_log: bool) -> (TickCoordinator, TickWaiter) {
        let state = Arc::new(Mutex::new(CoordState {
            ledger,
            log: Vec::new(),
            record_log,
        }));
        let (tx, rx) = mpsc::channel();
        (
            TickCoordinator {
                state: state.clone(),
                ticks: tx,
            },
            TickWaiter { state, ticks: rx },
        )
    }

    pub fn arrive(&self, sensor_id: &str, step: u64) -> TickDecision {
        let mut st = lock(&self.state);
        let decision = st.ledger.on_sensor_arrival(sensor_id, step);
        if st.record_log && decision.is_accepted() {
            st.log.push(SeqEvent::Accepted {
                step,
                sensor: sensor_id.to_owned(),
            });
        }
        if let TickDecision::Tick { step } = decision {
            if st.record_log {
                st.log.push(SeqEvent::Tick { step });
            }
            // The waiter may already be gone during shutdown.
            let _ = self.ticks.send(step);
        }
        decision
    }
}

impl TickWaiter {
    /// Blocks until the current step ticks or `deadline` elapses. A timeout
    /// never skips the step; the caller decides how to abort.
    pub fn await_step_or_timeout(&self, deadline: Duration) -> Result<u64, AwaitError> {
        if deadline.is_zero() {
            return Err(AwaitError::ZeroDeadline);
        }
        let start = Instant::now();
        match self.ticks.recv_timeout(deadline) {
            Ok(step) => Ok(step),
            Err(RecvTimeoutError::Timeout) => {
                let st = lock(&self.state);
                Err(AwaitError::Timeout(TimeoutReport {
                    step: st.ledger.step(),
                    missing: st.ledger.missing(),
                    waited: start.elapsed(),
                }))
            }
            Err(RecvTimeoutError::Disconnected) => Err(AwaitError::Disconnected),
        }
    }

    pub fn ticks(&self) -> u64 {
        lock(&self.state).ledger.ticks()
    }

    pub fn current_step(&self) -> u64 {
        lock(&self.state).ledger.step()
    }

    pub fn take_log(&self) -> Vec<SeqEvent> {
        std::mem::take(&mut lock(&self.state).log)
    }
}
