//! Connection to an external remote-controlling server.
//!
//! The simulator is the client: it polls the server for commands every
//! `poll_interval_ms` of virtual time, applies them through the engine, and
//! pushes a status packet for every applied change. Packets that cannot be
//! delivered stay queued and go out, in order, on a later cycle.

mod mock;
mod tcp;

use std::collections::{HashSet, VecDeque};
use std::io::BufRead;

use log::{info, warn};
use serde::{Deserialize, Serialize};

pub use mock::{serve_mock_remote, MockRemote, MockServerHandle};
pub use tcp::TcpTransport;

use crate::engine::{LogEntry, Outcome, Pacer, Provenance, Simulator, TaskAction};
use crate::model::{ModelError, SensorValue};
use crate::time::{SimTime, WallTime};
use crate::wire::{self, RemoteCommand, StatusPacket, WireError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("remote server unreachable: {0}")]
    Unreachable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("cannot bind: {0}")]
    BindFailure(String),
    #[error("invalid link configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// `host:port`, optionally prefixed with `tcp://`.
    pub endpoint: String,
    pub poll_interval_ms: u64,
    pub session_id: String,
}

impl LinkConfig {
    pub fn new(endpoint: impl Into<String>, poll_interval_ms: u64, session_id: impl Into<String>) -> Result<Self, LinkError> {
        if poll_interval_ms == 0 {
            return Err(LinkError::InvalidConfig("poll interval must be positive".into()));
        }
        Ok(LinkConfig { endpoint: endpoint.into(), poll_interval_ms, session_id: session_id.into() })
    }
}

/// Byte-level exchange with the server.
pub trait Transport: Send {
    /// Sends `POLL|<session>` and returns the raw lines before `END`.
    fn poll(&mut self, session_id: &str) -> Result<Vec<Vec<u8>>, LinkError>;
    /// Sends a batch of STAT lines and returns the server's ack count.
    fn push(&mut self, lines: &[Vec<u8>]) -> Result<usize, LinkError>;
}

pub(crate) fn parse_poll_response(reader: &mut impl BufRead) -> Result<Vec<Vec<u8>>, LinkError> {
    let mut lines = Vec::new();
    loop {
        let mut line = Vec::new();
        let n = reader
            .read_until(b'\n', &mut line)
            .map_err(|e| LinkError::Unreachable(e.to_string()))?;
        if n == 0 {
            return Err(LinkError::Unreachable("connection closed before END".into()));
        }
        if line == wire::END {
            return Ok(lines);
        }
        if let Some(reason) = wire::decode_err(&line) {
            return Err(LinkError::Unreachable(reason));
        }
        lines.push(line);
    }
}

pub(crate) fn parse_push_response(reply: &[u8]) -> Result<usize, LinkError> {
    if let Some(reason) = wire::decode_err(reply) {
        return Err(LinkError::Unreachable(reason));
    }
    wire::decode_ack(reply).map_err(|e| LinkError::Protocol(e.to_string()))
}

/// Fresh commands from one poll plus the lines that failed to parse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PollBatch {
    pub commands: Vec<RemoteCommand>,
    pub malformed: Vec<WireError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommandOutcome {
    Applied,
    Rejected(String),
    UnknownTarget,
}

/// Client side of the link. Owns the de-duplication set and the queue of
/// undelivered status lines.
pub struct RemoteLink {
    config: LinkConfig,
    transport: Box<dyn Transport>,
    seen: HashSet<String>,
    outbox: VecDeque<Vec<u8>>,
    parse_failures: u64,
    last_poll: Option<SimTime>,
}

impl std::fmt::Debug for RemoteLink {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteLink")
            .field("config", &self.config)
            .field("seen", &self.seen.len())
            .field("outbox", &self.outbox.len())
            .finish()
    }
}

impl RemoteLink {
    pub fn new(config: LinkConfig, transport: Box<dyn Transport>) -> Self {
        RemoteLink {
            config,
            transport,
            seen: HashSet::new(),
            outbox: VecDeque::new(),
            parse_failures: 0,
            last_poll: None,
        }
    }

    /// Link over TCP to `config.endpoint`.
    pub fn connect(config: LinkConfig) -> Self {
        let transport = TcpTransport::new(&config.endpoint);
        Self::new(config, Box::new(transport))
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn parse_failures(&self) -> u64 {
        self.parse_failures
    }

    /// Virtual time of the next poll: `now` for a fresh link, otherwise one
    /// interval after the last attempt.
    pub fn next_poll(&self, now: SimTime) -> SimTime {
        match self.last_poll {
            Some(t) => (t + self.config.poll_interval_ms).max(now),
            None => now,
        }
    }

    /// Status lines waiting for delivery.
    pub fn queued(&self) -> usize {
        self.outbox.len()
    }

    /// Fetches pending commands, dropping ids already seen in this run.
    pub fn poll_once(&mut self) -> Result<PollBatch, LinkError> {
        let lines = self.transport.poll(&self.config.session_id)?;
        let mut batch = PollBatch::default();
        for line in lines {
            match wire::decode_command(&line) {
                Ok(cmd) => {
                    if self.seen.insert(cmd.command_id.clone()) {
                        batch.commands.push(cmd);
                    }
                }
                Err(e) => {
                    self.parse_failures += 1;
                    batch.malformed.push(e);
                }
            }
        }
        Ok(batch)
    }

    /// Applies commands at the simulator's current virtual time.
    pub fn apply_commands(sim: &mut Simulator, cmds: &[RemoteCommand]) -> Vec<(String, CommandOutcome)> {
        cmds.iter()
            .map(|cmd| {
                let format = match sim.project().house.sensor_format(&cmd.object_id, &cmd.sensor_id) {
                    Ok(f) => f,
                    Err(_) => return (cmd.command_id.clone(), CommandOutcome::UnknownTarget),
                };
                let origin = Provenance::Remote { command_id: cmd.command_id.clone() };
                let entry = match SensorValue::parse_text(format, &cmd.value) {
                    Ok(value) => {
                        let action = TaskAction { device: cmd.object_id.clone(), sensor: cmd.sensor_id.clone(), value };
                        sim.apply_now(action, origin)
                    }
                    Err(v) => {
                        let err = ModelError::InvalidValue {
                            device: cmd.object_id.clone(),
                            sensor: cmd.sensor_id.clone(),
                            reason: v.0,
                        };
                        // keep the raw text so the log shows what arrived
                        let raw = SensorValue::State(cmd.value.clone());
                        let action = TaskAction { device: cmd.object_id.clone(), sensor: cmd.sensor_id.clone(), value: raw };
                        sim.reject_now(action, origin, err.to_string())
                    }
                };
                let outcome = match entry.outcome {
                    Outcome::Applied => CommandOutcome::Applied,
                    Outcome::Rejected(e) => CommandOutcome::Rejected(e),
                    Outcome::Suppressed => CommandOutcome::Rejected("suppressed".into()),
                };
                (cmd.command_id.clone(), outcome)
            })
            .collect()
    }

    /// Queues packets behind any undelivered ones and tries to send them all.
    /// On failure nothing is dropped.
    pub fn push_statuses(&mut self, packets: impl IntoIterator<Item = StatusPacket>) -> Result<usize, LinkError> {
        self.outbox.extend(packets.into_iter().map(|p| wire::encode_status_packet(&p)));
        self.flush()
    }

    /// Sends everything queued. Returns the number of lines acknowledged.
    pub fn flush(&mut self) -> Result<usize, LinkError> {
        if self.outbox.is_empty() {
            return Ok(0);
        }
        let batch: Vec<Vec<u8>> = self.outbox.iter().cloned().collect();
        let acked = self.transport.push(&batch)?;
        self.outbox.clear();
        Ok(acked)
    }
}

/// Status packets for the applied entries of a log slice.
pub fn status_packets(entries: &[LogEntry], epoch: WallTime) -> Vec<StatusPacket> {
    entries
        .iter()
        .filter(|e| e.outcome == Outcome::Applied)
        .map(|e| StatusPacket {
            object_id: e.event.action.device.clone(),
            sensor_id: e.event.action.sensor.clone(),
            sensor_value: e.event.action.value.to_text(),
            timestamp: e.event.fire_time.to_wall(epoch),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DriveStats {
    pub polls: u64,
    pub poll_failures: u64,
    pub push_failures: u64,
    pub commands: u64,
    pub malformed_lines: u64,
}

/// Runs the simulator to `until`, pacing with `pacer`. With a link, polls
/// every poll interval (the first poll of a fresh link is at the current time),
/// applies fetched commands at the poll instant and pushes a status packet
/// for every applied event. Remote failures are logged, never fatal.
pub fn drive(
    sim: &mut Simulator,
    mut link: Option<&mut RemoteLink>,
    until: SimTime,
    pacer: &Pacer,
) -> DriveStats {
    let mut stats = DriveStats::default();
    let epoch = sim.project().epoch;
    let mut pushed = sim.log().len();
    let mut next_poll = link.as_ref().map(|l| l.next_poll(sim.now()));

    loop {
        let boundary = match next_poll {
            Some(p) if p <= until => p,
            _ => until,
        };
        // step through due events so real-time pacing tracks each one
        while let Some(due) = sim.next_due().filter(|t| *t <= boundary) {
            pacer.wait_until(due);
            sim.run_until(due).expect("monotone");
        }
        pacer.wait_until(boundary);
        sim.run_until(boundary).expect("monotone");

        if let Some(link) = link.as_deref_mut() {
            if next_poll == Some(boundary) {
                stats.polls += 1;
                match link.poll_once() {
                    Ok(batch) => {
                        stats.malformed_lines += batch.malformed.len() as u64;
                        for (id, outcome) in RemoteLink::apply_commands(sim, &batch.commands) {
                            stats.commands += 1;
                            if outcome != CommandOutcome::Applied {
                                info!("remote command {id}: {outcome:?}");
                            }
                        }
                    }
                    Err(e) => {
                        stats.poll_failures += 1;
                        warn!("poll at {boundary} failed: {e}");
                    }
                }
                link.last_poll = Some(boundary);
                next_poll = Some(link.next_poll(boundary));
            }
            let fresh = status_packets(&sim.log()[pushed..], epoch);
            pushed = sim.log().len();
            if let Err(e) = link.push_statuses(fresh) {
                stats.push_failures += 1;
                warn!("status push at {boundary} failed ({} queued): {e}", link.queued());
            }
        }
        if boundary >= until {
            break;
        }
    }
    stats
}
