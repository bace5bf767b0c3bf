//! A complete simulation project: house, tasks and scenarios on one epoch.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::engine::{EntryTarget, FlatTask, Scenario, ScenarioEntry, ScheduledTask, TaskAction};
use crate::ids::{fresh_id, is_safe_id, ScenarioId, TaskId};
use crate::model::{validate_house, validate_value, House, ModelError, Violation};
use crate::time::WallTime;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProjectError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown task `{0}`")]
    UnknownTask(TaskId),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(ScenarioId),
    #[error("scenario inclusion cycle: {}", format_cycle(.0))]
    CycleDetected(Vec<ScenarioId>),
    #[error("repeat interval must be positive")]
    InvalidRepeat,
}

pub fn format_cycle(path: &[ScenarioId]) -> String {
    path.iter().map(ScenarioId::as_str).collect::<Vec<_>>().join(" → ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Project {
    /// Wall-clock instant mapped to virtual time zero.
    pub epoch: WallTime,
    pub house: House,
    #[serde(default)]
    pub tasks: Vec<ScheduledTask>,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
}

impl Project {
    pub fn new(epoch: WallTime, house: House) -> Self {
        Project { epoch, house, tasks: Vec::new(), scenarios: Vec::new() }
    }

    pub fn task(&self, id: &TaskId) -> Option<&ScheduledTask> {
        self.tasks.iter().find(|t| &t.id == id)
    }

    pub fn scenario(&self, id: &ScenarioId) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| &s.id == id)
    }

    pub fn scenario_index(&self, id: &ScenarioId) -> Option<usize> {
        self.scenarios.iter().position(|s| &s.id == id)
    }

    fn check_action(&self, action: &TaskAction) -> Result<(), ModelError> {
        let format = self.house.sensor_format(&action.device, &action.sensor)?;
        validate_value(format, &action.value).map_err(|v| ModelError::InvalidValue {
            device: action.device.clone(),
            sensor: action.sensor.clone(),
            reason: v.0,
        })
    }

    pub fn define_task(
        &mut self,
        name: &str,
        action: TaskAction,
        absolute_time: Option<WallTime>,
    ) -> Result<TaskId, ProjectError> {
        self.check_action(&action)?;
        let id = TaskId(fresh_id(name, "task", |c| self.tasks.iter().any(|t| t.id.as_str() == c)));
        self.tasks.push(ScheduledTask { id: id.clone(), name: name.to_string(), action, absolute_time });
        Ok(id)
    }

    fn check_entries(&self, entries: &[ScenarioEntry], own: &ScenarioId) -> Result<(), ProjectError> {
        for e in entries {
            match &e.target {
                EntryTarget::Task(t) if self.task(t).is_none() => return Err(ProjectError::UnknownTask(t.clone())),
                EntryTarget::Scenario(s) if s != own && self.scenario(s).is_none() => {
                    return Err(ProjectError::UnknownScenario(s.clone()))
                }
                _ => {}
            }
        }
        let cycle = find_cycle_from(own, |id| {
            if id == own {
                scenario_targets(entries)
            } else {
                self.scenario(id).map(|s| scenario_targets(&s.entries)).unwrap_or_default()
            }
        });
        match cycle {
            Some(path) => Err(ProjectError::CycleDetected(path)),
            None => Ok(()),
        }
    }

    /// Registers a new, enabled scenario after checking references and
    /// acyclicity.
    pub fn define_scenario(
        &mut self,
        name: &str,
        first_time: WallTime,
        repeat_ms: Option<u64>,
        entries: Vec<ScenarioEntry>,
    ) -> Result<ScenarioId, ProjectError> {
        if repeat_ms == Some(0) {
            return Err(ProjectError::InvalidRepeat);
        }
        let id = ScenarioId(fresh_id(name, "scenario", |c| self.scenarios.iter().any(|s| s.id.as_str() == c)));
        self.check_entries(&entries, &id)?;
        self.scenarios.push(Scenario {
            id: id.clone(),
            name: name.to_string(),
            first_time,
            repeat_ms,
            enabled: true,
            entries,
        });
        Ok(id)
    }

    /// Replaces the entry chain of an existing scenario.
    pub fn set_scenario_entries(&mut self, id: &ScenarioId, entries: Vec<ScenarioEntry>) -> Result<(), ProjectError> {
        if self.scenario(id).is_none() {
            return Err(ProjectError::UnknownScenario(id.clone()));
        }
        self.check_entries(&entries, id)?;
        let idx = self.scenario_index(id).expect("checked");
        self.scenarios[idx].entries = entries;
        Ok(())
    }

    /// Flattens a scenario's chain into tasks with offsets from launch, in
    /// lexicographic entry-path order. A nested scenario starts its own
    /// cursor at the moment it is reached; the parent cursor carries on from
    /// that same moment. Assumes an acyclic project.
    pub fn flatten(&self, id: &ScenarioId) -> Vec<FlatTask> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.flatten_into(id, 0, &mut path, &mut out);
        out
    }

    fn flatten_into(&self, id: &ScenarioId, start: u64, path: &mut Vec<u32>, out: &mut Vec<FlatTask>) {
        let Some(scenario) = self.scenario(id) else { return };
        let mut cursor = start;
        for (i, entry) in scenario.entries.iter().enumerate() {
            cursor += entry.delay_ms;
            path.push(i as u32);
            match &entry.target {
                EntryTarget::Task(t) => out.push(FlatTask { offset_ms: cursor, path: path.clone(), task: t.clone() }),
                EntryTarget::Scenario(s) => self.flatten_into(s, cursor, path, out),
            }
            path.pop();
        }
    }

    /// All rule violations across house, tasks and scenarios.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> = validate_house(&self.house).into_iter().map(|v| v.prefixed("house")).collect();

        let mut task_ids = HashSet::new();
        for t in &self.tasks {
            let path = format!("tasks[{}]", t.id);
            if !is_safe_id(t.id.as_str()) {
                out.push(Violation::new(&path, "id uses characters outside [A-Za-z0-9._:-]"));
            }
            if !task_ids.insert(&t.id) {
                out.push(Violation::new(&path, "duplicate task id"));
            }
            if let Err(e) = self.check_action(&t.action) {
                out.push(Violation::new(&format!("{path}.action"), e.to_string()));
            }
        }

        let mut scenario_ids = HashSet::new();
        for s in &self.scenarios {
            let path = format!("scenarios[{}]", s.id);
            if !is_safe_id(s.id.as_str()) {
                out.push(Violation::new(&path, "id uses characters outside [A-Za-z0-9._:-]"));
            }
            if !scenario_ids.insert(&s.id) {
                out.push(Violation::new(&path, "duplicate scenario id"));
            }
            if s.repeat_ms == Some(0) {
                out.push(Violation::new(&format!("{path}.repeat_ms"), "repeat interval must be positive"));
            }
            for (i, e) in s.entries.iter().enumerate() {
                let unresolved = match &e.target {
                    EntryTarget::Task(t) => self.task(t).is_none().then(|| format!("unknown task `{t}`")),
                    EntryTarget::Scenario(id) => {
                        self.scenario(id).is_none().then(|| format!("unknown scenario `{id}`"))
                    }
                };
                if let Some(rule) = unresolved {
                    out.push(Violation::new(&format!("{path}.entries[{i}]"), rule));
                }
            }
        }

        let edges: HashMap<&ScenarioId, Vec<ScenarioId>> =
            self.scenarios.iter().map(|s| (&s.id, scenario_targets(&s.entries))).collect();
        let mut reported: HashSet<ScenarioId> = HashSet::new();
        for s in &self.scenarios {
            if reported.contains(&s.id) {
                continue;
            }
            if let Some(cycle) = find_cycle_from(&s.id, |id| edges.get(id).cloned().unwrap_or_default()) {
                out.push(Violation::new(
                    &format!("scenarios[{}]", s.id),
                    format!("scenario inclusion cycle: {}", format_cycle(&cycle)),
                ));
                reported.extend(cycle);
            }
        }
        out
    }
}

fn scenario_targets(entries: &[ScenarioEntry]) -> Vec<ScenarioId> {
    entries
        .iter()
        .filter_map(|e| match &e.target {
            EntryTarget::Scenario(s) => Some(s.clone()),
            EntryTarget::Task(_) => None,
        })
        .collect()
}

/// Depth-first search for a path `start → … → start` in the inclusion graph.
fn find_cycle_from(start: &ScenarioId, targets: impl Fn(&ScenarioId) -> Vec<ScenarioId>) -> Option<Vec<ScenarioId>> {
    fn dfs(
        node: &ScenarioId,
        start: &ScenarioId,
        targets: &dyn Fn(&ScenarioId) -> Vec<ScenarioId>,
        visited: &mut HashSet<ScenarioId>,
        path: &mut Vec<ScenarioId>,
    ) -> bool {
        for next in targets(node) {
            if &next == start {
                path.push(next);
                return true;
            }
            if visited.insert(next.clone()) {
                path.push(next.clone());
                if dfs(&next, start, targets, visited, path) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut path = vec![start.clone()];
    let mut visited = HashSet::new();
    dfs(start, start, &targets, &mut visited, &mut path).then_some(path)
}
