use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::clock::{ClockMode, SimClock};
use super::timeline::{first_instance, launch_time, Provenance, SimEvent, SourceKey};
use super::{FlatTask, TaskAction};
use crate::ids::ScenarioId;
use crate::model::{DeviceStatus, Violation};
use crate::project::{Project, ProjectError};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("clock regression: requested {requested} but the clock is already at {now}")]
    ClockRegression { now: SimTime, requested: SimTime },
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error("project is invalid: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    InvalidProject(Vec<Violation>),
}

/// Result of applying one event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Applied,
    Rejected(String),
    /// The owning scenario was disabled when the event came due.
    Suppressed,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Applied => f.write_str("applied"),
            Outcome::Rejected(e) => write!(f, "rejected:{e}"),
            Outcome::Suppressed => f.write_str("suppressed"),
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "applied" => Ok(Outcome::Applied),
            "suppressed" => Ok(Outcome::Suppressed),
            _ => s
                .strip_prefix("rejected:")
                .map(|e| Outcome::Rejected(e.to_string()))
                .ok_or_else(|| format!("unrecognised outcome `{s}`")),
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub event: SimEvent,
    pub outcome: Outcome,
}

/// Pushed to observers after every processed event.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Notification {
    Event(LogEntry),
    Status { at: SimTime, status: DeviceStatus },
}

/// External input, applied at its stamped virtual time before any scheduled
/// event due at the same time.
#[derive(Debug, Clone, PartialEq)]
pub enum InboxItem {
    SetValue { action: TaskAction, origin: Provenance },
    SetEnabled { scenario: ScenarioId, enabled: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Inbox(u64),
    Launch { scenario: usize, instance: u64 },
    Fire(SourceKey),
}

#[derive(Debug)]
enum Payload {
    Inbox(InboxItem),
    Launch,
    Fire { action: TaskAction, provenance: Provenance },
}

#[derive(Debug)]
struct Pending {
    at: SimTime,
    slot: Slot,
    payload: Payload,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.slot == other.slot
    }
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, &self.slot).cmp(&(other.at, &other.slot))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Discrete-event executor. Owns the project (and therefore all sensor
/// state) and is its only writer.
pub struct Simulator {
    project: Project,
    clock: SimClock,
    queue: BinaryHeap<Reverse<Pending>>,
    log: Vec<LogEntry>,
    notifications: Vec<Notification>,
    flat: Vec<Vec<FlatTask>>,
    enabled: Vec<bool>,
    /// Whether the next launch of each scenario is already queued.
    launch_queued: Vec<bool>,
    next_seq: u64,
    next_inbox: u64,
}

impl fmt::Debug for Simulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulator")
            .field("now", &self.clock.now)
            .field("pending", &self.queue.len())
            .field("logged", &self.log.len())
            .finish()
    }
}

impl Simulator {
    /// Builds a simulator paused at virtual zero. The project must validate.
    pub fn new(project: Project) -> Result<Self, EngineError> {
        Self::with_mode(project, ClockMode::Fast)
    }

    pub fn with_mode(project: Project, mode: ClockMode) -> Result<Self, EngineError> {
        let violations = project.validate();
        if !violations.is_empty() {
            return Err(EngineError::InvalidProject(violations));
        }
        let flat = project.scenarios.iter().map(|s| project.flatten(&s.id)).collect();
        let enabled = project.scenarios.iter().map(|s| s.enabled).collect();
        let n = project.scenarios.len();
        let mut sim = Simulator {
            clock: SimClock { now: SimTime::ZERO, mode, epoch: project.epoch },
            project,
            queue: BinaryHeap::new(),
            log: Vec::new(),
            notifications: Vec::new(),
            flat,
            enabled,
            launch_queued: vec![false; n],
            next_seq: 0,
            next_inbox: 0,
        };
        for index in 0..n {
            if sim.enabled[index] {
                sim.queue_launch_from(index, SimTime::ZERO);
            }
        }
        for (index, task) in sim.project.tasks.iter().enumerate() {
            if let Some(at) = task.absolute_time.and_then(|t| t.to_virtual(sim.project.epoch)) {
                sim.queue.push(Reverse(Pending {
                    at,
                    slot: Slot::Fire(SourceKey::Task { index }),
                    payload: Payload::Fire {
                        action: task.action.clone(),
                        provenance: Provenance::Task { task_id: task.id.clone() },
                    },
                }));
            }
        }
        Ok(sim)
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn now(&self) -> SimTime {
        self.clock.now
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn is_enabled(&self, scenario: &ScenarioId) -> Option<bool> {
        self.project.scenario_index(scenario).map(|i| self.enabled[i])
    }

    pub fn get_status(&self, device: &crate::ids::DeviceId) -> Result<DeviceStatus, crate::model::ModelError> {
        self.project.house.get_status(device)
    }

    /// Takes all notifications produced since the last call.
    pub fn drain_notifications(&mut self) -> Vec<Notification> {
        std::mem::take(&mut self.notifications)
    }

    /// Fire time of the next queued item, if any.
    pub fn next_due(&self) -> Option<SimTime> {
        self.queue.peek().map(|Reverse(p)| p.at)
    }

    /// Queues the first launch at or after `from` for scenario `index`.
    fn queue_launch_from(&mut self, index: usize, from: SimTime) {
        if self.launch_queued[index] || self.flat[index].is_empty() {
            return;
        }
        let scenario = &self.project.scenarios[index];
        let first = scenario.first_time.as_millis() - self.project.epoch.as_millis();
        let Some((mut k, mut at)) = first_instance(first, scenario.repeat_ms) else { return };
        if at < from {
            let Some(repeat) = scenario.repeat_ms else { return };
            let behind = from.as_ms() - at.as_ms();
            k += behind.div_ceil(repeat);
            at = launch_time(first, scenario.repeat_ms, k).expect("non-negative");
        }
        self.launch_queued[index] = true;
        self.queue.push(Reverse(Pending { at, slot: Slot::Launch { scenario: index, instance: k }, payload: Payload::Launch }));
    }

    /// Queues an external input at virtual time `at` (not in the past).
    pub fn submit(&mut self, at: SimTime, item: InboxItem) -> Result<(), EngineError> {
        if at < self.clock.now {
            return Err(EngineError::ClockRegression { now: self.clock.now, requested: at });
        }
        if let InboxItem::SetEnabled { scenario, .. } = &item {
            if self.project.scenario_index(scenario).is_none() {
                return Err(ProjectError::UnknownScenario(scenario.clone()).into());
            }
        }
        let n = self.next_inbox;
        self.next_inbox += 1;
        self.queue.push(Reverse(Pending { at, slot: Slot::Inbox(n), payload: Payload::Inbox(item) }));
        Ok(())
    }

    /// Enables or disables a scenario from virtual time `at` on.
    pub fn set_enabled(&mut self, scenario: &ScenarioId, enabled: bool, at: SimTime) -> Result<(), EngineError> {
        self.submit(at, InboxItem::SetEnabled { scenario: scenario.clone(), enabled })?;
        if at == self.clock.now {
            self.drain_due(at);
        }
        Ok(())
    }

    /// Applies an external write at the current virtual time and returns its
    /// log entry.
    pub fn apply_now(&mut self, action: TaskAction, origin: Provenance) -> LogEntry {
        let at = self.clock.now;
        let id = self.next_inbox;
        self.submit(at, InboxItem::SetValue { action, origin }).expect("stamped at now");
        loop {
            let Reverse(p) = self.queue.pop().expect("just queued");
            let ours = p.slot == Slot::Inbox(id);
            let logged = self.process(p);
            if ours {
                return logged.expect("writes are always logged");
            }
        }
    }

    /// Logs an external write that was refused before reaching the house,
    /// e.g. a remote value that does not parse for its sensor.
    pub fn reject_now(&mut self, action: TaskAction, origin: Provenance, reason: String) -> LogEntry {
        let at = self.clock.now;
        self.drain_due(at);
        self.record(at, action, origin, Some(Outcome::Rejected(reason)))
    }

    fn drain_due(&mut self, t: SimTime) {
        while self.queue.peek().is_some_and(|Reverse(p)| p.at <= t) {
            let Reverse(p) = self.queue.pop().expect("peeked");
            self.process(p);
        }
    }

    /// Applies everything due at or before `t`, then sets the clock to `t`.
    pub fn run_until(&mut self, t: SimTime) -> Result<&[LogEntry], EngineError> {
        if t < self.clock.now {
            return Err(EngineError::ClockRegression { now: self.clock.now, requested: t });
        }
        let start = self.log.len();
        self.drain_due(t);
        self.clock.now = t;
        Ok(&self.log[start..])
    }

    /// Applies exactly the next logged event, advancing the clock to its
    /// fire time. Returns `None` when nothing is left to fire.
    pub fn step(&mut self) -> Option<LogEntry> {
        while let Some(Reverse(p)) = self.queue.pop() {
            self.clock.now = self.clock.now.max(p.at);
            if let Some(entry) = self.process(p) {
                return Some(entry);
            }
        }
        None
    }

    fn process(&mut self, p: Pending) -> Option<LogEntry> {
        match p.payload {
            Payload::Launch => {
                let Slot::Launch { scenario: index, instance } = p.slot else { unreachable!() };
                self.launch_queued[index] = false;
                if !self.enabled[index] {
                    return None;
                }
                let scenario_id = self.project.scenarios[index].id.clone();
                for f in &self.flat[index] {
                    let Some(task) = self.project.task(&f.task) else { continue };
                    self.queue.push(Reverse(Pending {
                        at: p.at + f.offset_ms,
                        slot: Slot::Fire(SourceKey::Scenario { index, instance, path: f.path.clone() }),
                        payload: Payload::Fire {
                            action: task.action.clone(),
                            provenance: Provenance::Scenario {
                                scenario_id: scenario_id.clone(),
                                instance,
                                entry_path: f.path.clone(),
                            },
                        },
                    }));
                }
                if self.project.scenarios[index].repeat_ms.is_some() {
                    self.queue_launch_from(index, p.at + 1);
                }
                None
            }
            Payload::Fire { action, provenance } => {
                let suppressed = match &p.slot {
                    Slot::Fire(SourceKey::Scenario { index, .. }) => !self.enabled[*index],
                    _ => false,
                };
                Some(self.record(p.at, action, provenance, suppressed.then_some(Outcome::Suppressed)))
            }
            Payload::Inbox(InboxItem::SetValue { action, origin }) => Some(self.record(p.at, action, origin, None)),
            Payload::Inbox(InboxItem::SetEnabled { scenario, enabled }) => {
                if let Some(index) = self.project.scenario_index(&scenario) {
                    self.enabled[index] = enabled;
                    if enabled {
                        self.queue_launch_from(index, p.at);
                    }
                }
                None
            }
        }
    }

    fn record(&mut self, at: SimTime, action: TaskAction, provenance: Provenance, forced: Option<Outcome>) -> LogEntry {
        let mut status = None;
        let outcome = if let Some(o) = forced {
            o
        } else {
            match self.project.house.set_sensor_value(&action.device, &action.sensor, action.value.clone(), at) {
                Ok(s) => {
                    status = Some(s);
                    Outcome::Applied
                }
                Err(e) => Outcome::Rejected(e.to_string()),
            }
        };
        let entry = LogEntry {
            event: SimEvent { fire_time: at, seq: self.next_seq, action, provenance },
            outcome,
        };
        self.next_seq += 1;
        self.log.push(entry.clone());
        self.notifications.push(Notification::Event(entry.clone()));
        if let Some(status) = status {
            self.notifications.push(Notification::Status { at, status });
        }
        entry
    }
}
