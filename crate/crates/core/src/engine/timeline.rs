use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TaskAction;
use crate::ids::{ScenarioId, TaskId};
use crate::project::Project;
use crate::time::SimTime;

/// Where an event came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    /// Entry `entry_path` of instance `instance` of a root scenario.
    Scenario { scenario_id: ScenarioId, instance: u64, entry_path: Vec<u32> },
    /// A standalone task firing at its absolute time.
    Task { task_id: TaskId },
    /// A command fetched from the remote-controlling server.
    Remote { command_id: String },
    /// A direct write through the service API.
    Manual,
}

impl fmt::Display for Provenance {
    /// `scenario:<id>#<k>@<i>.<j>`, `task:<id>`, `remote:<cmd>` or `manual`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Scenario { scenario_id, instance, entry_path } => {
                let path: Vec<String> = entry_path.iter().map(u32::to_string).collect();
                write!(f, "scenario:{scenario_id}#{instance}@{}", path.join("."))
            }
            Provenance::Task { task_id } => write!(f, "task:{task_id}"),
            Provenance::Remote { command_id } => write!(f, "remote:{command_id}"),
            Provenance::Manual => f.write_str("manual"),
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("unrecognised provenance `{s}`");
        if s == "manual" {
            return Ok(Provenance::Manual);
        }
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "task" => Ok(Provenance::Task { task_id: TaskId::new(rest) }),
            "remote" => Ok(Provenance::Remote { command_id: rest.to_string() }),
            "scenario" => {
                let (id, rest) = rest.rsplit_once('#').ok_or_else(bad)?;
                let (instance, path) = rest.split_once('@').ok_or_else(bad)?;
                let instance = instance.parse().map_err(|_| bad())?;
                let entry_path = if path.is_empty() {
                    Vec::new()
                } else {
                    path.split('.').map(|p| p.parse().map_err(|_| bad())).collect::<Result<_, _>>()?
                };
                Ok(Provenance::Scenario { scenario_id: ScenarioId::new(id), instance, entry_path })
            }
            _ => Err(bad()),
        }
    }
}

/// One executed (or to-be-executed) action on the virtual clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub fire_time: SimTime,
    pub seq: u64,
    pub action: TaskAction,
    pub provenance: Provenance,
}

/// Tie-break among events sharing a fire time: scenarios before standalone
/// tasks; scenarios by definition order, then instance, then entry path;
/// standalone tasks by definition order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum SourceKey {
    Scenario { index: usize, instance: u64, path: Vec<u32> },
    Task { index: usize },
}

/// Virtual launch time of instance `k` of a scenario, if it falls at or
/// after virtual zero. Instances that would have launched before the epoch
/// are skipped.
pub(crate) fn first_instance(first: i64, repeat_ms: Option<u64>) -> Option<(u64, SimTime)> {
    if first >= 0 {
        return Some((0, SimTime(first as u64)));
    }
    let repeat = repeat_ms? as i64;
    let k = (-first + repeat - 1) / repeat;
    Some((k as u64, SimTime((first + k * repeat) as u64)))
}

pub(crate) fn launch_time(first: i64, repeat_ms: Option<u64>, k: u64) -> Option<SimTime> {
    let t = first + (k * repeat_ms.unwrap_or(0)) as i64;
    (t >= 0).then_some(SimTime(t as u64))
}

/// Expands every scenario instance and standalone task up to `horizon`
/// (inclusive) into a totally ordered event list. Assumes a valid project,
/// no runtime toggles and no remote input. Scenarios disabled in the
/// definition contribute nothing.
pub fn compile_timeline(project: &Project, horizon: SimTime) -> Vec<SimEvent> {
    let mut pending: Vec<(SimTime, SourceKey, TaskAction, Provenance)> = Vec::new();
    for (index, scenario) in project.scenarios.iter().enumerate() {
        if !scenario.enabled {
            continue;
        }
        let flat = project.flatten(&scenario.id);
        if flat.is_empty() {
            continue;
        }
        let first = scenario.first_time.as_millis() - project.epoch.as_millis();
        let Some((mut k, mut launch)) = first_instance(first, scenario.repeat_ms) else { continue };
        while launch <= horizon {
            for f in &flat {
                let fire = launch + f.offset_ms;
                if fire > horizon {
                    continue;
                }
                let Some(task) = project.task(&f.task) else { continue };
                pending.push((
                    fire,
                    SourceKey::Scenario { index, instance: k, path: f.path.clone() },
                    task.action.clone(),
                    Provenance::Scenario { scenario_id: scenario.id.clone(), instance: k, entry_path: f.path.clone() },
                ));
            }
            if scenario.repeat_ms.is_none() {
                break;
            }
            k += 1;
            launch = launch_time(first, scenario.repeat_ms, k).expect("non-negative after first instance");
        }
    }
    for (index, task) in project.tasks.iter().enumerate() {
        let Some(at) = task.absolute_time.and_then(|t| t.to_virtual(project.epoch)) else { continue };
        if at <= horizon {
            pending.push((
                at,
                SourceKey::Task { index },
                task.action.clone(),
                Provenance::Task { task_id: task.id.clone() },
            ));
        }
    }
    pending.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    pending
        .into_iter()
        .enumerate()
        .map(|(seq, (fire_time, _, action, provenance))| SimEvent { fire_time, seq: seq as u64, action, provenance })
        .collect()
}
