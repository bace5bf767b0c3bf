use smarthouse_core::engine::{EntryTarget, Provenance, TaskAction};
use smarthouse_core::ids::ScenarioId;
use smarthouse_core::Project;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleEvent {
    pub fire_ms: u64,
    pub seq: u64,
    pub action: TaskAction,
    pub provenance: Provenance,
    pub suppressed: bool,
}

/// Runtime enable/disable of a scenario at a whole second.
#[derive(Debug, Clone, PartialEq)]
pub struct Toggle {
    pub at_s: u64,
    pub scenario: ScenarioId,
    pub enabled: bool,
}

fn enabled_at(initial: bool, toggles: &[Toggle], scenario: &ScenarioId, t_s: u64) -> bool {
    toggles
        .iter()
        .filter(|tg| &tg.scenario == scenario && tg.at_s <= t_s)
        .fold(initial, |_, tg| tg.enabled)
}

enum Node {
    Task(usize),
    Scenario(usize),
}

/// Entries with ids resolved to indices.
fn resolve(project: &Project) -> Vec<Vec<(u64, Node)>> {
    let scenario = |id: &ScenarioId| project.scenarios.iter().position(|s| &s.id == id).expect("scenario");
    project
        .scenarios
        .iter()
        .map(|s| {
            s.entries
                .iter()
                .map(|e| {
                    let node = match &e.target {
                        EntryTarget::Task(t) => Node::Task(project.tasks.iter().position(|x| &x.id == t).expect("task")),
                        EntryTarget::Scenario(sub) => Node::Scenario(scenario(sub)),
                    };
                    (e.delay_ms, node)
                })
                .collect()
        })
        .collect()
}

/// Longest offset any task in the chain can reach (ms).
fn span_ms(chains: &[Vec<(u64, Node)>], index: usize) -> u64 {
    let mut cursor = 0;
    let mut longest = 0;
    for (delay, node) in &chains[index] {
        cursor += delay;
        let reach = match node {
            Node::Task(_) => cursor,
            Node::Scenario(sub) => cursor + span_ms(chains, *sub),
        };
        longest = longest.max(reach);
    }
    longest
}

/// Emits, in entry-path order, every task of the chain that fires exactly at `t`.
fn walk(chains: &[Vec<(u64, Node)>], index: usize, cursor: u64, t: u64, path: &mut Vec<u32>, hit: &mut Vec<(Vec<u32>, usize)>) {
    let mut c = cursor;
    for (i, (delay, node)) in chains[index].iter().enumerate() {
        c += delay;
        if c > t {
            // delays never go negative, so nothing later can fire at t
            break;
        }
        path.push(i as u32);
        match node {
            Node::Task(task) => {
                if c == t {
                    hit.push((path.clone(), *task));
                }
            }
            Node::Scenario(sub) => walk(chains, *sub, c, t, path, hit),
        }
        path.pop();
    }
}

/// Walks t = 0, 1, 2, … seconds up to `horizon_ms` and lists every due
/// event. Requires whole-second delays, repeats and first times.
///
/// Rules applied at each second `t`: instance `k` of a scenario launched at
/// `first + k·repeat` (only `k = 0` without a repeat, never before virtual
/// zero, and only if the scenario is enabled at launch) contributes each
/// task whose running delay sum equals `t`; the event is suppressed if the
/// scenario is disabled at `t`. Standalone tasks fire once at their
/// absolute time. Ties break by scenario order, instance, entry path, then
/// standalone tasks by definition order.
pub fn brute_force_timeline(project: &Project, horizon_ms: u64, toggles: &[Toggle]) -> Vec<OracleEvent> {
    let epoch = project.epoch.as_millis();
    let chains = resolve(project);
    let spans: Vec<u64> = (0..chains.len()).map(|i| span_ms(&chains, i)).collect();
    let mut out = Vec::new();
    for t_s in 0..=horizon_ms / 1000 {
        let t = t_s * 1000;
        for (si, s) in project.scenarios.iter().enumerate() {
            let first = s.first_time.as_millis() - epoch;
            let repeat = s.repeat_ms.map(|r| r as i64);
            let t_i = t as i64;
            let (k_lo, k_hi) = match repeat {
                None => (0, 0),
                Some(r) => {
                    // instances that launched no later than t and no earlier than t - span
                    let lo = (t_i - spans[si] as i64 - first).div_euclid(r).max(0);
                    let hi = (t_i - first).div_euclid(r);
                    (lo, hi)
                }
            };
            for k in k_lo..=k_hi {
                let launch = first + k * repeat.unwrap_or(0);
                if launch < 0 || launch > t_i {
                    continue;
                }
                if !enabled_at(s.enabled, toggles, &s.id, launch as u64 / 1000) {
                    continue;
                }
                let mut hit = Vec::new();
                walk(&chains, si, launch as u64, t, &mut Vec::new(), &mut hit);
                let suppressed = !enabled_at(s.enabled, toggles, &s.id, t_s);
                for (path, task) in hit {
                    out.push(OracleEvent {
                        fire_ms: t,
                        seq: 0,
                        action: project.tasks[task].action.clone(),
                        provenance: Provenance::Scenario { scenario_id: s.id.clone(), instance: k as u64, entry_path: path },
                        suppressed,
                    });
                }
            }
        }
        for task in &project.tasks {
            if let Some(at) = task.absolute_time {
                if at.as_millis() - epoch == t as i64 {
                    out.push(OracleEvent {
                        fire_ms: t,
                        seq: 0,
                        action: task.action.clone(),
                        provenance: Provenance::Task { task_id: task.id.clone() },
                        suppressed: false,
                    });
                }
            }
        }
    }
    for (i, e) in out.iter_mut().enumerate() {
        e.seq = i as u64;
    }
    out
}
