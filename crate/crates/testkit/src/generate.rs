use rand::seq::SliceRandom;
use rand::Rng;

use smarthouse_core::engine::{ScenarioEntry, TaskAction};
use smarthouse_core::ids::{DeviceId, SensorKindId};
use smarthouse_core::model::{
    Background, DataFormat, House, HousePlan, OpeningKind, Point2, Rect, SensorValue,
};
use smarthouse_core::time::WallTime;
use smarthouse_core::Project;

/// Bounds for generated projects. Times are whole seconds.
#[derive(Debug, Clone)]
pub struct GenParams {
    pub max_scenarios: usize,
    pub max_entries: usize,
    pub max_depth: usize,
    pub max_delay_s: u64,
    pub max_repeat_s: u64,
    pub horizon_s: u64,
    /// Adds rooms, openings, placements, background and stored readings.
    pub rich_plan: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_scenarios: 5,
            max_entries: 10,
            max_depth: 3,
            max_delay_s: 60,
            max_repeat_s: 120,
            horizon_s: 3600,
            rich_plan: false,
        }
    }
}

fn mm<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let lo_mm = (lo * 1000.0).round() as i64;
    let hi_mm = (hi * 1000.0).round() as i64;
    rng.gen_range(lo_mm..=hi_mm) as f64 / 1000.0
}

fn random_value<R: Rng>(rng: &mut R, format: &DataFormat) -> SensorValue {
    match format {
        DataFormat::Numeral { min, max, .. } => SensorValue::Number(rng.gen_range(*min..=*max)),
        DataFormat::MultiState { states } => SensorValue::State(states.choose(rng).expect("≥2 states").clone()),
        DataFormat::Point { bounds } => SensorValue::Position {
            x: rng.gen_range(bounds.min.x..=bounds.max.x),
            y: rng.gen_range(bounds.min.y..=bounds.max.y),
        },
    }
}

/// A valid project built only through the public operations.
pub fn random_project<R: Rng>(rng: &mut R, p: &GenParams) -> Project {
    let width = mm(rng, 4.0, 30.0);
    let height = mm(rng, 4.0, 30.0);
    let bounds = Rect::new(0.0, 0.0, width, height);
    let mut house = House::new(HousePlan::new(bounds));

    let mut kinds: Vec<SensorKindId> = Vec::new();
    kinds.push(house.add_sensor_kind("Light", DataFormat::multi_state(["On", "Off"])).unwrap());
    kinds.push(house.add_sensor_kind("Light level", DataFormat::multi_state(["light", "dim", "dark"])).unwrap());
    let lo = rng.gen_range(-20..10) as f64;
    kinds.push(house.add_sensor_kind("Temperature", DataFormat::numeral(lo, lo + 40.0, "°C")).unwrap());
    if rng.gen_bool(0.5) {
        kinds.push(house.add_point_sensor_kind("Occupant", None).unwrap());
    }
    if rng.gen_bool(0.3) {
        // odd characters in state names exercise wire escaping
        kinds.push(house.add_sensor_kind("Mode", DataFormat::multi_state(["a|b", "back\\slash", "x y"])).unwrap());
    }

    let n_devices = rng.gen_range(1..=5);
    let mut devices: Vec<DeviceId> = Vec::new();
    for i in 0..n_devices {
        let n_sensors = rng.gen_range(1..=3);
        let picked: Vec<SensorKindId> = (0..n_sensors).map(|_| kinds.choose(rng).unwrap().clone()).collect();
        let name = ["Lamp", "Heater", "Window", "Fan", "Sensor hub"][i % 5];
        devices.push(house.add_device(name, &picked, &name.to_lowercase()).unwrap());
    }

    if p.rich_plan {
        for r in 0..rng.gen_range(0..=3) {
            let x0 = mm(rng, 0.0, width / 2.0);
            let y0 = mm(rng, 0.0, height / 2.0);
            let x1 = mm(rng, x0 + 0.5, width);
            let y1 = mm(rng, y0 + 0.5, height);
            let poly = if rng.gen_bool(0.5) {
                vec![Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x1, y1), Point2::new(x0, y1)]
            } else {
                vec![Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x0, y1)]
            };
            house.add_room(&format!("Room {r}"), poly).unwrap();
        }
        for _ in 0..rng.gen_range(0..=3) {
            let a = Point2::new(mm(rng, 0.0, width / 2.0), mm(rng, 0.0, height));
            let b = Point2::new(mm(rng, width / 2.0 + 0.001, width), a.y);
            let kind = if rng.gen_bool(0.5) { OpeningKind::Door } else { OpeningKind::Window };
            house.add_opening(kind, a, b).unwrap();
        }
        if rng.gen_bool(0.5) {
            house.plan.background = Some(Background {
                image_path: "plans/top-view.png".into(),
                meters_per_pixel: mm(rng, 0.001, 0.1),
            });
        }
        for d in &devices {
            if rng.gen_bool(0.7) {
                let pos = Point2::new(mm(rng, 0.0, width), mm(rng, 0.0, height));
                house.place_device(d, pos).unwrap();
            }
        }
        for d in &devices {
            let sensors = house.device(d).unwrap().sensors.clone();
            for s in sensors {
                if rng.gen_bool(0.3) {
                    let format = house.sensor_format(d, &s.id).unwrap().clone();
                    let value = random_value(rng, &format);
                    house.set_sensor_value(d, &s.id, value, smarthouse_core::time::SimTime(rng.gen_range(0..5000))).unwrap();
                }
            }
        }
    }

    let epoch = WallTime::from_ymd_hms(2021, 1, 1, 0, 0, 0);
    let mut project = Project::new(epoch, house);

    let n_tasks = rng.gen_range(1..=12);
    let mut tasks = Vec::new();
    for i in 0..n_tasks {
        let device = devices.choose(rng).unwrap().clone();
        let dev = project.house.device(&device).unwrap();
        let sensor = dev.sensors.choose(rng).unwrap().id.clone();
        let format = project.house.sensor_format(&device, &sensor).unwrap().clone();
        let value = random_value(rng, &format);
        let absolute = rng
            .gen_bool(0.25)
            .then(|| WallTime(epoch.as_millis() + 1000 * rng.gen_range(0..=p.horizon_s + 60) as i64));
        let id = project
            .define_task(&format!("Task {i}"), TaskAction { device, sensor, value }, absolute)
            .unwrap();
        tasks.push(id);
    }

    let n_scenarios = rng.gen_range(0..=p.max_scenarios);
    let mut depth: Vec<usize> = Vec::new();
    for i in 0..n_scenarios {
        let n_entries = rng.gen_range(0..=p.max_entries);
        let mut entries = Vec::new();
        let mut my_depth = 1;
        for _ in 0..n_entries {
            let delay = 1000 * rng.gen_range(0..=p.max_delay_s);
            let nestable: Vec<usize> = (0..i).filter(|j| depth[*j] < p.max_depth).collect();
            if !nestable.is_empty() && rng.gen_bool(0.25) {
                let j = *nestable.choose(rng).unwrap();
                my_depth = my_depth.max(depth[j] + 1);
                entries.push(ScenarioEntry::scenario(delay, project.scenarios[j].id.clone()));
            } else {
                entries.push(ScenarioEntry::task(delay, tasks.choose(rng).unwrap().clone()));
            }
        }
        let first = WallTime(epoch.as_millis() + 1000 * rng.gen_range(0..=p.horizon_s) as i64);
        let repeat = rng.gen_bool(0.6).then(|| 1000 * rng.gen_range(1..=p.max_repeat_s));
        let id = project.define_scenario(&format!("Scenario {i}"), first, repeat, entries).unwrap();
        if rng.gen_bool(0.1) {
            let idx = project.scenario_index(&id).unwrap();
            project.scenarios[idx].enabled = false;
        }
        depth.push(my_depth);
    }
    project
}
