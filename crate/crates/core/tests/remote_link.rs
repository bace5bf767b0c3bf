use smarthouse_core::engine::{ClockMode, Outcome, Pacer, Provenance, ScenarioEntry, Simulator, TaskAction};
use smarthouse_core::ids::{DeviceId, SensorId};
use smarthouse_core::link::{
    drive, serve_mock_remote, CommandOutcome, LinkConfig, LinkError, MockRemote, RemoteLink, TcpTransport, Transport,
};
use smarthouse_core::model::{DataFormat, House, HousePlan, Rect, SensorValue};
use smarthouse_core::time::{SimTime, WallTime};
use smarthouse_core::wire::{self, RemoteCommand};
use smarthouse_core::Project;

fn epoch() -> WallTime {
    WallTime::from_ymd_hms(2021, 1, 1, 0, 0, 0)
}

/// Lamp with a multi-state light and a 0..100 dimmer, one scenario
/// switching the light on at 1 s and off at 2 s.
fn project() -> Project {
    let mut house = House::new(HousePlan::new(Rect::new(0.0, 0.0, 10.0, 8.0)));
    let light = house.add_sensor_kind("Light", DataFormat::multi_state(["On", "Off"])).unwrap();
    let dim = house.add_sensor_kind("Dimmer", DataFormat::numeral(0.0, 100.0, "%")).unwrap();
    let lamp = house.add_device("Lamp", &[light, dim], "lamp").unwrap();
    let mut p = Project::new(epoch(), house);
    let act = |v: &str| TaskAction { device: lamp.clone(), sensor: "light-1".into(), value: SensorValue::state(v) };
    let on = p.define_task("On", act("On"), None).unwrap();
    let off = p.define_task("Off", act("Off"), None).unwrap();
    p.define_scenario(
        "Blink",
        WallTime(epoch().as_millis()),
        None,
        vec![ScenarioEntry::task(1000, on), ScenarioEntry::task(1000, off)],
    )
    .unwrap();
    p
}

fn cmd(id: &str, sensor: &str, value: &str) -> RemoteCommand {
    RemoteCommand {
        command_id: id.into(),
        object_id: DeviceId::from("lamp-1"),
        sensor_id: SensorId::from(sensor),
        value: value.into(),
        issued_at: epoch(),
    }
}

fn in_process(mock: &MockRemote, poll_ms: u64) -> RemoteLink {
    RemoteLink::new(LinkConfig::new("in-process", poll_ms, "s1").unwrap(), Box::new(mock.clone()))
}

#[test]
fn zero_poll_interval_is_rejected() {
    assert!(matches!(LinkConfig::new("x:1", 0, "s"), Err(LinkError::InvalidConfig(_))));
}

#[test]
fn duplicate_command_ids_apply_once() {
    let mock = MockRemote::new();
    let mut link = in_process(&mock, 1000);
    mock.enqueue(&cmd("c1", "dimmer-1", "40"));
    let first = link.poll_once().unwrap();
    mock.enqueue(&cmd("c1", "dimmer-1", "40"));
    let second = link.poll_once().unwrap();
    assert_eq!(first.commands.len(), 1);
    assert!(second.commands.is_empty());

    let mut sim = Simulator::new(project()).unwrap();
    RemoteLink::apply_commands(&mut sim, &first.commands);
    RemoteLink::apply_commands(&mut sim, &second.commands);
    assert_eq!(sim.log().len(), 1);
}

#[test]
fn malformed_line_is_counted_and_skipped() {
    let mock = MockRemote::new();
    let mut link = in_process(&mock, 1000);
    mock.enqueue(&cmd("c1", "dimmer-1", "10"));
    mock.enqueue_raw(b"CMD|broken\n".to_vec());
    mock.enqueue(&cmd("c2", "dimmer-1", "20"));
    let batch = link.poll_once().unwrap();
    assert_eq!(batch.commands.iter().map(|c| c.command_id.as_str()).collect::<Vec<_>>(), vec!["c1", "c2"]);
    assert_eq!(batch.malformed.len(), 1);
    assert_eq!(link.parse_failures(), 1);
}

#[test]
fn command_outcomes() {
    let mut sim = Simulator::new(project()).unwrap();
    let cmds = vec![
        cmd("a", "dimmer-1", "55.5"),
        cmd("b", "dimmer-1", "150"),
        cmd("c", "light-1", "on"),
        cmd("d", "dimmer-1", "bright"),
        cmd("e", "heater-1", "1"),
        RemoteCommand { object_id: "ghost-1".into(), ..cmd("f", "dimmer-1", "1") },
    ];
    let out = RemoteLink::apply_commands(&mut sim, &cmds);
    assert_eq!(out[0], ("a".to_string(), CommandOutcome::Applied));
    assert!(matches!(out[1].1, CommandOutcome::Rejected(ref m) if m.contains("dimmer-1")));
    assert!(matches!(out[2].1, CommandOutcome::Rejected(_)));
    assert!(matches!(out[3].1, CommandOutcome::Rejected(ref m) if m.contains("not a number")));
    assert_eq!(out[4].1, CommandOutcome::UnknownTarget);
    assert_eq!(out[5].1, CommandOutcome::UnknownTarget);
    // unknown targets never reach the log; rejections do
    let outcomes: Vec<&Outcome> = sim.log().iter().map(|e| &e.outcome).collect();
    assert_eq!(outcomes.len(), 4);
    assert_eq!(outcomes[0], &Outcome::Applied);
    assert!(outcomes[1..].iter().all(|o| matches!(o, Outcome::Rejected(_))));
    assert_eq!(sim.log()[3].event.action.value.to_text(), "bright");
    let status = sim.get_status(&"lamp-1".into()).unwrap();
    assert_eq!(status.entries[1].value, Some(SensorValue::Number(55.5)));
}

#[test]
fn drive_polls_at_interval_and_pushes_applied_changes() {
    let mock = MockRemote::new();
    let mut link = in_process(&mock, 500);
    let mut sim = Simulator::new(project()).unwrap();
    mock.enqueue(&cmd("r1", "dimmer-1", "70"));
    let stats = drive(&mut sim, Some(&mut link), SimTime(3000), &Pacer::new(ClockMode::Fast, SimTime::ZERO));
    // polls at 0, 500, ..., 3000
    assert_eq!(stats.polls, 7);
    assert_eq!(mock.poll_count(), 7);
    assert_eq!(stats.commands, 1);
    let log = sim.log();
    assert_eq!(log[0].event.provenance, Provenance::Remote { command_id: "r1".into() });
    assert_eq!(log[0].event.fire_time, SimTime::ZERO);
    let got: Vec<(String, String)> =
        mock.received().into_iter().map(|p| (p.sensor_id.to_string(), p.sensor_value)).collect();
    assert_eq!(
        got,
        vec![("dimmer-1".into(), "70".into()), ("light-1".into(), "On".into()), ("light-1".into(), "Off".into())]
    );
    let ts: Vec<String> = mock.received().iter().map(|p| p.timestamp.to_string()).collect();
    assert_eq!(ts, vec!["2021-01-01T00:00:00Z", "2021-01-01T00:00:01Z", "2021-01-01T00:00:02Z"]);
}

#[test]
fn outage_queues_statuses_and_delivers_in_order() {
    let mock = MockRemote::new();
    let mut link = in_process(&mock, 1000);
    let mut sim = Simulator::new(project()).unwrap();
    let pacer = Pacer::new(ClockMode::Fast, SimTime::ZERO);
    mock.set_available(false);
    // polls at 0, 1000, 2000: the first three fail
    let stats = drive(&mut sim, Some(&mut link), SimTime(2000), &pacer);
    assert_eq!(stats.poll_failures, 3);
    assert!(mock.received().is_empty());
    assert_eq!(link.queued(), 2);
    mock.set_available(true);
    let stats = drive(&mut sim, Some(&mut link), SimTime(3000), &pacer);
    assert_eq!(stats.poll_failures, 0);
    assert_eq!(link.queued(), 0);
    let values: Vec<String> = mock.received().into_iter().map(|p| p.sensor_value).collect();
    assert_eq!(values, vec!["On", "Off"]);
    // the engine never paused
    assert_eq!(sim.log().len(), 2);
}

#[test]
fn tcp_round_trip_against_mock_server() {
    let (mock, handle) = serve_mock_remote("127.0.0.1:0").unwrap();
    let endpoint = format!("tcp://{}", handle.local_addr());
    let mut link = RemoteLink::connect(LinkConfig::new(endpoint, 1000, "tcp").unwrap());
    mock.enqueue(&cmd("t1", "light-1", "Off"));
    let mut sim = Simulator::new(project()).unwrap();
    let stats = drive(&mut sim, Some(&mut link), SimTime(2000), &Pacer::new(ClockMode::Fast, SimTime::ZERO));
    assert_eq!(stats.poll_failures + stats.push_failures, 0);
    assert_eq!(stats.polls, 3);
    let values: Vec<String> = mock.received().into_iter().map(|p| p.sensor_value).collect();
    assert_eq!(values, vec!["Off", "On", "Off"]);
}

#[test]
fn tcp_unavailable_server_reports_err() {
    let (mock, handle) = serve_mock_remote("127.0.0.1:0").unwrap();
    mock.set_available(false);
    let mut t = TcpTransport::new(&handle.local_addr().to_string());
    assert!(matches!(t.poll("x"), Err(LinkError::Unreachable(ref m)) if m == "unavailable"));
    assert!(t.push(&[b"STAT|a|b|c|2021-01-01T00:00:00Z\n".to_vec()]).is_err());
}

#[test]
fn tcp_unreachable_endpoint() {
    // bind then drop to get a port nobody listens on
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut t = TcpTransport::new(&format!("127.0.0.1:{port}"));
    assert!(matches!(t.poll("x"), Err(LinkError::Unreachable(_))));
}

#[test]
fn mock_control_requests() {
    use std::io::{BufRead, BufReader, Write};
    let (mock, handle) = serve_mock_remote("127.0.0.1:0").unwrap();
    let mut s = std::net::TcpStream::connect(handle.local_addr()).unwrap();
    let mut r = BufReader::new(s.try_clone().unwrap());
    let mut ask = |req: &[u8]| {
        s.write_all(req).unwrap();
        let mut line = String::new();
        r.read_line(&mut line).unwrap();
        line
    };
    let enq = [b"ENQ|".as_slice(), &wire::encode_command(&cmd("m1", "light-1", "On"))].concat();
    assert_eq!(ask(&enq), "OK\n");
    assert!(ask(b"ENQ|garbage\n").starts_with("ERR|"));
    assert_eq!(ask(b"AVAIL|off\n"), "OK\n");
    assert!(!mock.is_available());
    assert!(ask(b"HELLO\n").starts_with("ERR|"));
    assert_eq!(mock.pending_commands(), 1);
}

#[test]
fn bind_failure_is_reported() {
    let (_mock, handle) = serve_mock_remote("127.0.0.1:0").unwrap();
    let again = serve_mock_remote(&handle.local_addr().to_string());
    assert!(matches!(again, Err(LinkError::BindFailure(_))));
}

#[test]
fn resumed_drive_keeps_the_poll_cadence() {
    let mock = MockRemote::new();
    let mut link = in_process(&mock, 1000);
    let mut sim = Simulator::new(project()).unwrap();
    let pacer = Pacer::new(ClockMode::Fast, SimTime::ZERO);
    drive(&mut sim, Some(&mut link), SimTime(1500), &pacer);
    assert_eq!(mock.poll_count(), 2);
    // next poll is at 2000, not again at 1500
    assert_eq!(link.next_poll(sim.now()), SimTime(2000));
    drive(&mut sim, Some(&mut link), SimTime(3000), &pacer);
    assert_eq!(mock.poll_count(), 4);
}
