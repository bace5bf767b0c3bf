//! Project files and event-log export.
//!
//! Projects are stored as pretty-printed UTF-8 JSON with a top-level
//! `schema_version`. Field order is fixed by the type definitions and plan
//! geometry is written with at most three fraction digits, so saving the
//! same project always yields the same bytes.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{LogEntry, Outcome, Provenance, Scenario, ScheduledTask};
use crate::model::{House, Violation};
use crate::project::Project;
use crate::time::WallTime;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("{}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion(u64),
    #[error("invalid project: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Invalid(Vec<Violation>),
}

impl PersistError {
    fn io(path: &Path, source: io::Error) -> Self {
        PersistError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Serialize)]
struct DocumentOut<'a> {
    schema_version: u64,
    epoch: WallTime,
    house: &'a House,
    tasks: &'a [ScheduledTask],
    scenarios: &'a [Scenario],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentIn {
    #[allow(dead_code)]
    schema_version: u64,
    epoch: WallTime,
    house: House,
    #[serde(default)]
    tasks: Vec<ScheduledTask>,
    #[serde(default)]
    scenarios: Vec<Scenario>,
}

/// Canonical text of a project. Refuses invalid projects.
pub fn to_canonical_json(project: &Project) -> Result<String, PersistError> {
    let violations = project.validate();
    if !violations.is_empty() {
        return Err(PersistError::Invalid(violations));
    }
    let doc = DocumentOut {
        schema_version: SCHEMA_VERSION,
        epoch: project.epoch,
        house: &project.house,
        tasks: &project.tasks,
        scenarios: &project.scenarios,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| PersistError::SchemaViolation {
        path: "$".into(),
        message: e.to_string(),
    })?;
    text.push('\n');
    Ok(text)
}

/// Parses and fully validates project text.
pub fn from_json(text: &str) -> Result<Project, PersistError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| PersistError::SchemaViolation { path: "$".into(), message: e.to_string() })?;
    let version = value
        .get("schema_version")
        .ok_or_else(|| PersistError::SchemaViolation {
            path: "schema_version".into(),
            message: "missing field".into(),
        })?
        .as_u64()
        .ok_or_else(|| PersistError::SchemaViolation {
            path: "schema_version".into(),
            message: "expected a non-negative integer".into(),
        })?;
    if version != SCHEMA_VERSION {
        return Err(PersistError::UnsupportedVersion(version));
    }
    let doc: DocumentIn = serde_path_to_error::deserialize(value).map_err(|e| PersistError::SchemaViolation {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let project = Project { epoch: doc.epoch, house: doc.house, tasks: doc.tasks, scenarios: doc.scenarios };
    let violations = project.validate();
    if violations.is_empty() {
        Ok(project)
    } else {
        Err(PersistError::Invalid(violations))
    }
}

pub fn save_project(project: &Project, path: impl AsRef<Path>) -> Result<(), PersistError> {
    let path = path.as_ref();
    let text = to_canonical_json(project)?;
    fs::write(path, text).map_err(|e| PersistError::io(path, e))
}

pub fn load_project(path: impl AsRef<Path>) -> Result<Project, PersistError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| PersistError::io(path, e))?;
    from_json(&text)
}

/// Flat form of one log entry, in export column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLogRecord {
    pub fire_time_ms: u64,
    pub seq: u64,
    pub object_id: String,
    pub sensor_id: String,
    pub value: String,
    pub outcome: String,
    pub provenance: String,
}

impl EventLogRecord {
    pub const HEADER: [&'static str; 7] =
        ["fire_time_ms", "seq", "object_id", "sensor_id", "value", "outcome", "provenance"];

    pub fn outcome(&self) -> Result<Outcome, String> {
        self.outcome.parse()
    }

    pub fn provenance(&self) -> Result<Provenance, String> {
        self.provenance.parse()
    }
}

impl From<&LogEntry> for EventLogRecord {
    fn from(e: &LogEntry) -> Self {
        EventLogRecord {
            fire_time_ms: e.event.fire_time.as_ms(),
            seq: e.event.seq,
            object_id: e.event.action.device.to_string(),
            sensor_id: e.event.action.sensor.to_string(),
            value: e.event.action.value.to_text(),
            outcome: e.outcome.to_string(),
            provenance: e.event.provenance.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogFormat {
    /// Comma-separated with a header row.
    #[default]
    Csv,
    /// One JSON object per line.
    Jsonl,
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Writes one record per entry. Returns the number of records.
pub fn write_event_log(log: &[LogEntry], out: impl Write, format: LogFormat) -> io::Result<usize> {
    match format {
        LogFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(out);
            w.write_record(EventLogRecord::HEADER).map_err(csv_err)?;
            for entry in log {
                w.serialize(EventLogRecord::from(entry)).map_err(csv_err)?;
            }
            w.flush()?;
        }
        LogFormat::Jsonl => {
            let mut out = io::BufWriter::new(out);
            for entry in log {
                serde_json::to_writer(&mut out, &EventLogRecord::from(entry))?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(log.len())
}

pub fn export_event_log(log: &[LogEntry], path: impl AsRef<Path>, format: LogFormat) -> Result<usize, PersistError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| PersistError::io(path, e))?;
    write_event_log(log, file, format).map_err(|e| PersistError::io(path, e))
}

pub fn read_event_log(input: impl io::Read, format: LogFormat) -> io::Result<Vec<EventLogRecord>> {
    match format {
        LogFormat::Csv => {
            let mut r = csv::Reader::from_reader(input);
            let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
            if header != EventLogRecord::HEADER {
                return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unexpected header {header:?}")));
            }
            r.deserialize().map(|row| row.map_err(csv_err)).collect()
        }
        LogFormat::Jsonl => io::BufReader::new(input)
            .lines()
            .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
            .map(|l| serde_json::from_str(&l?).map_err(io::Error::from))
            .collect(),
    }
}

pub fn import_event_log(path: impl AsRef<Path>, format: LogFormat) -> Result<Vec<EventLogRecord>, PersistError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| PersistError::io(path, e))?;
    read_event_log(file, format).map_err(|e| PersistError::io(path, e))
}
