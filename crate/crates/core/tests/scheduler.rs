use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smarthouse_core::engine::{compile_timeline, Outcome, Provenance, ScenarioEntry, Simulator, TaskAction};
use smarthouse_core::ids::{DeviceId, ScenarioId, SensorId, TaskId};
use smarthouse_core::model::{DataFormat, House, HousePlan, Rect, SensorValue};
use smarthouse_core::time::{SimTime, WallTime};
use smarthouse_core::Project;
use smarthouse_testkit::{brute_force_timeline, random_project, GenParams, Toggle};

const S: u64 = 1000;

struct Fixture {
    project: Project,
    lamp: DeviceId,
    light: SensorId,
    on: TaskId,
    off: TaskId,
}

fn epoch() -> WallTime {
    WallTime::from_ymd_hms(2021, 1, 1, 0, 0, 0)
}

fn at(secs: i64) -> WallTime {
    WallTime(epoch().as_millis() + secs * 1000)
}

fn fixture() -> Fixture {
    let mut house = House::new(HousePlan::new(Rect::new(0.0, 0.0, 10.0, 8.0)));
    let light_kind = house.add_sensor_kind("Light", DataFormat::multi_state(["On", "Off"])).unwrap();
    let lamp = house.add_device("Lamp", &[light_kind], "lamp").unwrap();
    let light = SensorId::from("light-1");
    let mut project = Project::new(epoch(), house);
    let action = |v: &str| TaskAction { device: lamp.clone(), sensor: light.clone(), value: SensorValue::state(v) };
    let on = project.define_task("LampOn", action("On"), None).unwrap();
    let off = project.define_task("LampOff", action("Off"), None).unwrap();
    Fixture { project, lamp, light, on, off }
}

/// first fire at 100 s, delays [5 s, 10 s]
fn evening(f: &mut Fixture, repeat: Option<u64>) -> ScenarioId {
    let entries = vec![ScenarioEntry::task(5 * S, f.on.clone()), ScenarioEntry::task(10 * S, f.off.clone())];
    f.project.define_scenario("Evening", at(100), repeat, entries).unwrap()
}

fn fire_times(events: &[smarthouse_core::engine::SimEvent]) -> Vec<u64> {
    events.iter().map(|e| e.fire_time.as_ms()).collect()
}

#[test]
fn delay_chain_without_repeat() {
    let mut f = fixture();
    evening(&mut f, None);
    let events = compile_timeline(&f.project, SimTime(3_600_000));
    assert_eq!(fire_times(&events), vec![105_000, 115_000]);
}

#[test]
fn delay_chain_with_fixed_rate_repeat() {
    let mut f = fixture();
    evening(&mut f, Some(60 * S));
    let events = compile_timeline(&f.project, SimTime(250_000));
    assert_eq!(fire_times(&events), vec![105_000, 115_000, 165_000, 175_000, 225_000, 235_000]);
    let instances: Vec<u64> = events
        .iter()
        .map(|e| match &e.provenance {
            Provenance::Scenario { instance, .. } => *instance,
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(instances, vec![0, 0, 1, 1, 2, 2]);
    let oracle = brute_force_timeline(&f.project, 250_000, &[]);
    assert_eq!(oracle.iter().map(|e| e.fire_ms).collect::<Vec<_>>(), fire_times(&events));
}

#[test]
fn zero_delays_fire_in_entry_order() {
    let mut f = fixture();
    let entries = vec![
        ScenarioEntry::task(0, f.on.clone()),
        ScenarioEntry::task(0, f.off.clone()),
        ScenarioEntry::task(0, f.on.clone()),
    ];
    f.project.define_scenario("Burst", at(10), None, entries).unwrap();
    let events = compile_timeline(&f.project, SimTime(60_000));
    assert!(events.iter().all(|e| e.fire_time == SimTime(10_000)));
    let paths: Vec<Vec<u32>> = events
        .iter()
        .map(|e| match &e.provenance {
            Provenance::Scenario { entry_path, .. } => entry_path.clone(),
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(paths, vec![vec![0], vec![1], vec![2]]);
    assert_eq!(events.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn standalone_tasks_fire_once_at_their_time() {
    let mut f = fixture();
    let action = TaskAction { device: f.lamp.clone(), sensor: f.light.clone(), value: SensorValue::state("On") };
    f.project.define_task("Morning", action.clone(), Some(at(8 * 3600))).unwrap();
    f.project.define_task("Before epoch", action, Some(at(-5))).unwrap();
    let events = compile_timeline(&f.project, SimTime(24 * 3_600_000));
    assert_eq!(fire_times(&events), vec![8 * 3_600_000]);
    // a task without absolute time never fires on its own
    assert!(events.iter().all(|e| matches!(e.provenance, Provenance::Task { .. })));
}

#[test]
fn overlapping_instances_interleave() {
    let mut f = fixture();
    let entries = vec![ScenarioEntry::task(0, f.on.clone()), ScenarioEntry::task(30 * S, f.off.clone())];
    f.project.define_scenario("Blink", at(0), Some(20 * S), entries).unwrap();
    let events = compile_timeline(&f.project, SimTime(60_000));
    assert_eq!(fire_times(&events), vec![0, 20_000, 30_000, 40_000, 50_000, 60_000]);
}

#[test]
fn nested_scenario_ignores_its_own_schedule() {
    let mut f = fixture();
    let inner = f
        .project
        .define_scenario("Inner", at(1000), Some(7 * S), vec![ScenarioEntry::task(2 * S, f.off.clone())])
        .unwrap();
    let entries = vec![ScenarioEntry::scenario(5 * S, inner), ScenarioEntry::task(S, f.on.clone())];
    let outer = f.project.define_scenario("Outer", at(10), None, entries).unwrap();
    let events = compile_timeline(&f.project, SimTime(20_000));
    // inner's own first time (1000 s) is past the horizon; only the nested copy fires
    assert_eq!(fire_times(&events), vec![16_000, 17_000]);
    assert!(matches!(&events[0].provenance, Provenance::Scenario { entry_path, .. } if entry_path == &vec![1]));
    match &events[1].provenance {
        Provenance::Scenario { scenario_id, entry_path, .. } => {
            assert_eq!(scenario_id, &outer);
            assert_eq!(entry_path, &vec![0, 0]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn prefix_sum_and_repeat_laws() {
    let mut f = fixture();
    let delays = [3u64, 0, 11, 7];
    let entries: Vec<ScenarioEntry> = delays.iter().map(|d| ScenarioEntry::task(d * S, f.on.clone())).collect();
    f.project.define_scenario("Flat", at(42), Some(50 * S), entries).unwrap();
    let horizon = 1_000_000u64;
    let events = compile_timeline(&f.project, SimTime(horizon));
    let first = 42_000u64;
    let expected_instances = (horizon - first) / 50_000 + 1;
    let mut expected = Vec::new();
    for k in 0..expected_instances {
        let mut c = first + k * 50_000;
        for d in delays {
            c += d * S;
            if c <= horizon {
                expected.push(c);
            }
        }
    }
    expected.sort();
    assert_eq!(fire_times(&events), expected);
    let launched = events
        .iter()
        .filter_map(|e| match &e.provenance {
            Provenance::Scenario { instance, .. } => Some(*instance),
            _ => None,
        })
        .max()
        .unwrap()
        + 1;
    assert_eq!(launched, expected_instances);
}

#[test]
fn disabled_scenario_contributes_nothing() {
    let mut f = fixture();
    let id = evening(&mut f, Some(60 * S));
    let idx = f.project.scenario_index(&id).unwrap();
    f.project.scenarios[idx].enabled = false;
    assert!(compile_timeline(&f.project, SimTime(1_000_000)).is_empty());
    let mut sim = Simulator::new(f.project).unwrap();
    assert!(sim.run_until(SimTime(1_000_000)).unwrap().is_empty());
}

#[test]
fn run_matches_compile() {
    let mut f = fixture();
    evening(&mut f, Some(60 * S));
    let compiled = compile_timeline(&f.project, SimTime(250_000));
    let mut sim = Simulator::new(f.project).unwrap();
    let log = sim.run_until(SimTime(250_000)).unwrap().to_vec();
    assert!(log.iter().all(|e| e.outcome == Outcome::Applied));
    assert_eq!(log.into_iter().map(|e| e.event).collect::<Vec<_>>(), compiled);
    assert_eq!(sim.now(), SimTime(250_000));
}

#[test]
fn run_until_is_idempotent_and_monotone() {
    let mut f = fixture();
    evening(&mut f, Some(60 * S));
    let mut sim = Simulator::new(f.project).unwrap();
    assert_eq!(sim.run_until(SimTime(200_000)).unwrap().len(), 4);
    assert!(sim.run_until(SimTime(200_000)).unwrap().is_empty());
    assert!(sim.run_until(SimTime(100_000)).is_err());
}

#[test]
fn split_run_equals_single_run() {
    let mut f = fixture();
    evening(&mut f, Some(60 * S));
    let mut a = Simulator::new(f.project.clone()).unwrap();
    a.run_until(SimTime(125_000)).unwrap();
    a.run_until(SimTime(250_000)).unwrap();
    let mut b = Simulator::new(f.project).unwrap();
    b.run_until(SimTime(250_000)).unwrap();
    assert_eq!(a.log(), b.log());
}

#[test]
fn same_time_same_sensor_later_seq_wins() {
    let mut f = fixture();
    f.project.define_scenario("A", at(10), None, vec![ScenarioEntry::task(0, f.on.clone())]).unwrap();
    f.project.define_scenario("B", at(10), None, vec![ScenarioEntry::task(0, f.off.clone())]).unwrap();
    let mut sim = Simulator::new(f.project).unwrap();
    let log = sim.run_until(SimTime(10_000)).unwrap().to_vec();
    assert_eq!(log.len(), 2);
    assert!(log[0].event.seq < log[1].event.seq);
    let status = sim.get_status(&f.lamp).unwrap();
    assert_eq!(status.entries[0].value, Some(SensorValue::state("Off")));
}

#[test]
fn step_semantics() {
    let f = fixture();
    let mut sim = Simulator::new(f.project.clone()).unwrap();
    assert_eq!(sim.step(), None);
    assert_eq!(sim.now(), SimTime::ZERO);

    let mut f = fixture();
    f.project.define_scenario("One", at(3), None, vec![ScenarioEntry::task(0, f.on.clone())]).unwrap();
    let mut sim = Simulator::new(f.project).unwrap();
    let e = sim.step().unwrap();
    assert_eq!(e.event.fire_time, SimTime(3000));
    assert_eq!(sim.now(), SimTime(3000));
    assert_eq!(sim.step(), None);
}

#[test]
fn n_steps_equal_run_until_nth_fire_time() {
    let mut f = fixture();
    evening(&mut f, Some(60 * S));
    let mut stepped = Simulator::new(f.project.clone()).unwrap();
    let mut last = SimTime::ZERO;
    for _ in 0..5 {
        last = stepped.step().unwrap().event.fire_time;
    }
    let mut ran = Simulator::new(f.project).unwrap();
    ran.run_until(last).unwrap();
    assert_eq!(stepped.log(), ran.log());
    assert_eq!(stepped.now(), ran.now());
}

#[test]
fn disable_before_first_time() {
    let mut f = fixture();
    let id = evening(&mut f, Some(60 * S));
    let mut sim = Simulator::new(f.project).unwrap();
    sim.set_enabled(&id, false, SimTime(50_000)).unwrap();
    assert!(sim.run_until(SimTime(1_000_000)).unwrap().is_empty());
}

#[test]
fn disable_mid_chain_suppresses_the_rest() {
    let mut f = fixture();
    let id = evening(&mut f, None);
    let toggles = [Toggle { at_s: 110, scenario: id.clone(), enabled: false }];
    let oracle = brute_force_timeline(&f.project, 200_000, &toggles);
    let mut sim = Simulator::new(f.project).unwrap();
    sim.set_enabled(&id, false, SimTime(110_000)).unwrap();
    let log = sim.run_until(SimTime(200_000)).unwrap().to_vec();
    assert_eq!(log.len(), 2);
    assert_eq!((log[0].event.fire_time, &log[0].outcome), (SimTime(105_000), &Outcome::Applied));
    assert_eq!((log[1].event.fire_time, &log[1].outcome), (SimTime(115_000), &Outcome::Suppressed));
    assert_eq!(oracle.iter().map(|e| e.suppressed).collect::<Vec<_>>(), vec![false, true]);
    // the suppressed write never reached the sensor
    assert_eq!(sim.get_status(&f.lamp).unwrap().entries[0].value, Some(SensorValue::state("On")));
}

#[test]
fn reenable_before_next_boundary_launches_normally() {
    let mut f = fixture();
    let id = evening(&mut f, Some(60 * S));
    let toggles = [
        Toggle { at_s: 110, scenario: id.clone(), enabled: false },
        Toggle { at_s: 150, scenario: id.clone(), enabled: true },
    ];
    let oracle = brute_force_timeline(&f.project, 250_000, &toggles);
    let mut sim = Simulator::new(f.project).unwrap();
    sim.set_enabled(&id, false, SimTime(110_000)).unwrap();
    sim.set_enabled(&id, true, SimTime(150_000)).unwrap();
    let log = sim.run_until(SimTime(250_000)).unwrap().to_vec();
    let got: Vec<(u64, bool)> = log.iter().map(|e| (e.event.fire_time.as_ms(), e.outcome == Outcome::Suppressed)).collect();
    let want: Vec<(u64, bool)> = oracle.iter().map(|e| (e.fire_ms, e.suppressed)).collect();
    assert_eq!(got, want);
    assert_eq!(
        got,
        vec![(105_000, false), (115_000, true), (165_000, false), (175_000, false), (225_000, false), (235_000, false)]
    );
}

#[test]
fn disabled_at_launch_skips_instance_even_if_reenabled_mid_chain() {
    let mut f = fixture();
    let id = evening(&mut f, Some(60 * S));
    let mut sim = Simulator::new(f.project).unwrap();
    sim.set_enabled(&id, false, SimTime(90_000)).unwrap();
    sim.set_enabled(&id, true, SimTime(101_000)).unwrap();
    let times: Vec<u64> = sim.run_until(SimTime(200_000)).unwrap().iter().map(|e| e.event.fire_time.as_ms()).collect();
    assert_eq!(times, vec![165_000, 175_000]);
}

#[test]
fn unknown_scenario_toggle_is_an_error() {
    let f = fixture();
    let mut sim = Simulator::new(f.project).unwrap();
    assert!(sim.set_enabled(&"ghost".into(), false, SimTime(0)).is_err());
}

#[test]
fn repeating_scenario_with_empty_chain_does_not_stall_step() {
    let mut f = fixture();
    f.project.define_scenario("Idle", at(0), Some(1000), vec![]).unwrap();
    let mut sim = Simulator::new(f.project).unwrap();
    assert_eq!(sim.step(), None);
}

#[test]
fn manual_writes_interleave_and_collisions_are_logged() {
    let mut f = fixture();
    evening(&mut f, None);
    let mut sim = Simulator::new(f.project).unwrap();
    sim.run_until(SimTime(110_000)).unwrap();
    let action = TaskAction { device: f.lamp.clone(), sensor: f.light.clone(), value: SensorValue::state("Off") };
    let e = sim.apply_now(action.clone(), Provenance::Manual);
    assert_eq!(e.outcome, Outcome::Applied);
    assert_eq!(e.event.fire_time, SimTime(110_000));
    let bad = TaskAction { value: SensorValue::state("off"), ..action };
    let e = sim.apply_now(bad, Provenance::Remote { command_id: "c9".into() });
    assert!(matches!(e.outcome, Outcome::Rejected(ref m) if m.contains("invalid value")));
    sim.run_until(SimTime(200_000)).unwrap();
    let seqs: Vec<u64> = sim.log().iter().map(|e| e.event.seq).collect();
    assert_eq!(seqs, vec![0, 1, 2, 3]);
}

#[test]
fn status_notifications_follow_applied_events() {
    let mut f = fixture();
    evening(&mut f, None);
    let mut sim = Simulator::new(f.project).unwrap();
    sim.run_until(SimTime(120_000)).unwrap();
    let notes = sim.drain_notifications();
    assert_eq!(notes.len(), 4);
    assert!(sim.drain_notifications().is_empty());
}

#[test]
fn first_time_before_epoch_skips_early_instances() {
    let mut f = fixture();
    let entries = vec![ScenarioEntry::task(0, f.on.clone())];
    f.project.define_scenario("Old", at(-90), Some(60 * S), entries).unwrap();
    let events = compile_timeline(&f.project, SimTime(100_000));
    assert_eq!(fire_times(&events), vec![30_000, 90_000]);
    let mut sim = Simulator::new(f.project).unwrap();
    let run: Vec<u64> = sim.run_until(SimTime(100_000)).unwrap().iter().map(|e| e.event.fire_time.as_ms()).collect();
    assert_eq!(run, vec![30_000, 90_000]);
}

fn small_params() -> GenParams {
    GenParams { horizon_s: 900, max_repeat_s: 120, ..GenParams::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn compile_matches_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let project = random_project(&mut rng, &small_params());
        let horizon = 900_000;
        let compiled = compile_timeline(&project, SimTime(horizon));
        let oracle = brute_force_timeline(&project, horizon, &[]);
        prop_assert_eq!(compiled.len(), oracle.len());
        for (c, o) in compiled.iter().zip(&oracle) {
            prop_assert_eq!(c.fire_time.as_ms(), o.fire_ms);
            prop_assert_eq!(c.seq, o.seq);
            prop_assert_eq!(&c.provenance, &o.provenance);
            prop_assert_eq!(&c.action, &o.action);
        }
    }

    #[test]
    fn log_is_totally_ordered_and_timestamps_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let project = random_project(&mut rng, &small_params());
        let mut sim = Simulator::new(project).unwrap();
        sim.run_until(SimTime(900_000)).unwrap();
        for w in sim.log().windows(2) {
            prop_assert!((w[0].event.fire_time, w[0].event.seq) < (w[1].event.fire_time, w[1].event.seq));
        }
        // every stored reading still fits its format
        prop_assert!(sim.project().validate().is_empty());
    }

    #[test]
    fn runtime_toggles_match_masked_oracle(seed in any::<u64>(), toggle_seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let project = random_project(&mut rng, &small_params());
        prop_assume!(!project.scenarios.is_empty());
        let mut trng = ChaCha8Rng::seed_from_u64(toggle_seed);
        let mut toggles: Vec<Toggle> = (0..trng.gen_range(1..6))
            .map(|_| Toggle {
                at_s: trng.gen_range(0..900),
                scenario: project.scenarios[trng.gen_range(0..project.scenarios.len())].id.clone(),
                enabled: trng.gen_bool(0.5),
            })
            .collect();
        toggles.sort_by_key(|t| t.at_s);
        let oracle = brute_force_timeline(&project, 900_000, &toggles);
        let mut sim = Simulator::new(project).unwrap();
        for t in &toggles {
            sim.set_enabled(&t.scenario, t.enabled, SimTime(t.at_s * 1000)).unwrap();
        }
        sim.run_until(SimTime(900_000)).unwrap();
        let got: Vec<(u64, Provenance, bool)> = sim
            .log()
            .iter()
            .map(|e| (e.event.fire_time.as_ms(), e.event.provenance.clone(), e.outcome == Outcome::Suppressed))
            .collect();
        let want: Vec<(u64, Provenance, bool)> = oracle.into_iter().map(|e| (e.fire_ms, e.provenance, e.suppressed)).collect();
        prop_assert_eq!(got, want);
    }
}
