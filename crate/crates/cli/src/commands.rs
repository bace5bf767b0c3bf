use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::anyhow;
use log::info;
use serde::Serialize;

use smarthouse_core::engine::{ClockMode, EngineError, Outcome, Pacer, Simulator};
use smarthouse_core::link::{drive, serve_mock_remote, DriveStats, LinkConfig, LinkError, RemoteLink};
use smarthouse_core::persistence::{export_event_log, load_project, LogFormat, PersistError};
use smarthouse_core::time::SimTime;

use crate::args::Horizon;

pub const EXIT_IO: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_IO, error: error.into() }
    }

    pub fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_INVALID, error: error.into() }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_RUNTIME, error: error.into() }
    }
}

impl From<PersistError> for Failure {
    fn from(e: PersistError) -> Self {
        match e {
            PersistError::Io { .. } => Failure::io(e),
            _ => Failure::invalid(e),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidProject(_) | EngineError::Project(_) => Failure::invalid(e),
            EngineError::ClockRegression { .. } => Failure::runtime(e),
        }
    }
}

impl From<LinkError> for Failure {
    fn from(e: LinkError) -> Self {
        match e {
            LinkError::BindFailure(_) | LinkError::Unreachable(_) => Failure::io(e),
            LinkError::InvalidConfig(_) => Failure::invalid(e),
            LinkError::Protocol(_) => Failure::runtime(e),
        }
    }
}

pub fn validate(path: &Path) -> Result<(), Failure> {
    load_project(path)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub project: PathBuf,
    pub until: Horizon,
    pub mode: ClockMode,
    pub remote: Option<LinkConfig>,
    pub log: Option<(PathBuf, LogFormat)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub end_ms: u64,
    pub applied: usize,
    pub rejected: usize,
    pub suppressed: usize,
    pub remote: Option<DriveStats>,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ran to {}: {} applied, {} rejected, {} suppressed",
            SimTime(self.end_ms),
            self.applied,
            self.rejected,
            self.suppressed
        )?;
        if let Some(r) = &self.remote {
            write!(
                f,
                "; remote: {} polls ({} failed), {} commands, {} malformed lines, {} failed pushes",
                r.polls, r.poll_failures, r.commands, r.malformed_lines, r.push_failures
            )?;
        }
        Ok(())
    }
}

pub fn run(opts: &RunOptions) -> Result<RunSummary, Failure> {
    let project = load_project(&opts.project)?;
    let until = opts.until.resolve(project.epoch).map_err(|e| Failure::invalid(anyhow!(e)))?;
    let mut sim = Simulator::with_mode(project, opts.mode)?;
    let mut link = opts.remote.clone().map(RemoteLink::connect);
    let started = Instant::now();
    let stats = drive(&mut sim, link.as_mut(), until, &Pacer::new(opts.mode, SimTime::ZERO));
    info!("run to {until} took {:?}", started.elapsed());

    if let Some((path, format)) = &opts.log {
        export_event_log(sim.log(), path, *format)?;
    }
    let mut summary = RunSummary { end_ms: sim.now().as_ms(), remote: link.map(|_| stats), ..Default::default() };
    for e in sim.log() {
        match e.outcome {
            Outcome::Applied => summary.applied += 1,
            Outcome::Rejected(_) => summary.rejected += 1,
            Outcome::Suppressed => summary.suppressed += 1,
        }
    }
    Ok(summary)
}

/// Serves the mock remote until the process is stopped.
pub fn mock_remote(listen: &str) -> Result<(), Failure> {
    let (_remote, handle) = serve_mock_remote(listen)?;
    println!("mock remote listening on {}", handle.local_addr());
    handle.join();
    Ok(())
}
