use serde::{Deserialize, Serialize};

use crate::ids::{DeviceId, ScenarioId, SensorId, TaskId};
use crate::model::SensorValue;
use crate::time::WallTime;

/// Set one sensor of one device to a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskAction {
    pub device: DeviceId,
    pub sensor: SensorId,
    pub value: SensorValue,
}

/// A reusable action. With `absolute_time` it also fires once on its own;
/// scenarios that reference it ignore that time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledTask {
    pub id: TaskId,
    pub name: String,
    pub action: TaskAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absolute_time: Option<WallTime>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryTarget {
    Task(TaskId),
    Scenario(ScenarioId),
}

/// One step of a delay chain. The delay counts from the previous entry (or
/// from the launch, for the first entry).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub delay_ms: u64,
    pub target: EntryTarget,
}

impl ScenarioEntry {
    pub fn task(delay_ms: u64, id: impl Into<TaskId>) -> Self {
        ScenarioEntry { delay_ms, target: EntryTarget::Task(id.into()) }
    }

    pub fn scenario(delay_ms: u64, id: impl Into<ScenarioId>) -> Self {
        ScenarioEntry { delay_ms, target: EntryTarget::Scenario(id.into()) }
    }
}

fn enabled_default() -> bool {
    true
}

/// A named delay chain, launched at `first_time` and every `repeat_ms`
/// afterwards (fixed rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: ScenarioId,
    pub name: String,
    pub first_time: WallTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_ms: Option<u64>,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
    #[serde(default)]
    pub entries: Vec<ScenarioEntry>,
}

/// A task reached through a scenario's (possibly nested) chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatTask {
    /// Offset from the root instance's launch.
    pub offset_ms: u64,
    /// Entry indices from the root scenario down to the task entry.
    pub path: Vec<u32>,
    pub task: TaskId,
}
