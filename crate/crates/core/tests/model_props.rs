use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smarthouse_core::ids::{DeviceId, SensorId};
use smarthouse_core::model::*;
use smarthouse_core::time::SimTime;
use smarthouse_testkit::{random_project, GenParams};

fn dimmer_house() -> (House, DeviceId) {
    let mut house = House::new(HousePlan::new(Rect::new(0.0, 0.0, 10.0, 10.0)));
    let dim = house.add_sensor_kind("Dimmer", DataFormat::numeral(0.0, 100.0, "%")).unwrap();
    let mode = house.add_sensor_kind("Mode", DataFormat::multi_state(["Eco", "Boost", "Off"])).unwrap();
    let occ = house.add_point_sensor_kind("Occupant", None).unwrap();
    let dev = house.add_device("Lamp", &[dim, mode, occ], "lamp").unwrap();
    (house, dev)
}

fn value_for(kind: usize) -> BoxedStrategy<SensorValue> {
    match kind {
        0 => (-50.0..150.0f64).prop_map(SensorValue::Number).boxed(),
        1 => prop_oneof![Just("Eco"), Just("eco"), Just("Boost"), Just("BOOST"), Just("Off"), Just("of")]
            .prop_map(SensorValue::state)
            .boxed(),
        _ => (-2.0..12.0f64, -2.0..12.0f64).prop_map(|(x, y)| SensorValue::Position { x, y }).boxed(),
    }
}

fn write() -> impl Strategy<Value = (usize, SensorValue, u64)> {
    (0usize..3).prop_flat_map(|k| (Just(k), value_for(k), 0u64..1000))
}

proptest! {
    #[test]
    fn multi_state_is_case_sensitive(states in prop::collection::btree_set("[a-zA-Z]{1,8}", 1..6), pick in any::<prop::sample::Index>()) {
        let states: Vec<String> = states.into_iter().collect();
        let format = DataFormat::multi_state(states.clone());
        let s = pick.get(&states);
        prop_assert!(validate_value(&format, &SensorValue::state(s.clone())).is_ok());
        for variant in [s.to_uppercase(), s.to_lowercase()] {
            let expected_ok = states.contains(&variant);
            prop_assert_eq!(validate_value(&format, &SensorValue::state(variant)).is_ok(), expected_ok);
        }
    }

    #[test]
    fn numeral_range_is_inclusive(a in -1e6..1e6f64, span in 1e-3..1e6f64, t in 0.0..=1.0f64) {
        let format = DataFormat::numeral(a, a + span, "");
        prop_assert!(validate_value(&format, &SensorValue::Number(a)).is_ok());
        prop_assert!(validate_value(&format, &SensorValue::Number(a + span)).is_ok());
        let inside = (a + t * span).clamp(a, a + span);
        prop_assert!(validate_value(&format, &SensorValue::Number(inside)).is_ok());
        prop_assert!(validate_value(&format, &SensorValue::Number(a + span * 1.5 + 1.0)).is_err());
    }

    #[test]
    fn writes_keep_every_reading_valid(writes in prop::collection::vec(write(), 1..40)) {
        let (mut house, dev) = dimmer_house();
        let sensors = ["dimmer-1", "mode-1", "occupant-1"];
        let mut last = [None::<SimTime>; 3];
        let mut expected: [Option<SensorValue>; 3] = [None, None, None];
        for (k, value, t) in writes {
            let sensor = SensorId::from(sensors[k]);
            let at = SimTime(t);
            let res = house.set_sensor_value(&dev, &sensor, value.clone(), at);
            let format = house.sensor_format(&dev, &sensor).unwrap().clone();
            let valid = validate_value(&format, &value).is_ok();
            let in_order = last[k].is_none_or(|l| at >= l);
            prop_assert_eq!(res.is_ok(), valid && in_order);
            if res.is_ok() {
                last[k] = Some(at);
                expected[k] = Some(value);
            }
            // read-your-writes and purity of get_status
            let a = house.get_status(&dev).unwrap();
            let b = house.get_status(&dev).unwrap();
            prop_assert_eq!(&a, &b);
            for i in 0..3 {
                prop_assert_eq!(&a.entries[i].value, &expected[i]);
                prop_assert_eq!(a.entries[i].last_update, last[i]);
                prop_assert_eq!(a.entries[i].value.is_some(), a.entries[i].last_update.is_some());
            }
            prop_assert!(validate_house(&house).is_empty());
        }
    }

    #[test]
    fn houses_built_through_operations_validate(seed in any::<u64>()) {
        let params = GenParams { rich_plan: true, ..GenParams::default() };
        let project = random_project(&mut ChaCha8Rng::seed_from_u64(seed), &params);
        prop_assert!(validate_house(&project.house).is_empty());
        prop_assert!(project.validate().is_empty());
    }
}

#[test]
fn status_entries_follow_declaration_order() {
    let (house, dev) = dimmer_house();
    let ids: Vec<String> = house.get_status(&dev).unwrap().entries.iter().map(|e| e.sensor_id.to_string()).collect();
    assert_eq!(ids, vec!["dimmer-1", "mode-1", "occupant-1"]);
}
