use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use smarthouse_core::persistence::LogFormat;
use smarthouse_core::time::{SimTime, WallTime};

#[derive(Debug, Parser)]
#[command(name = "smarthouse", version, about = "Scenario-based smart house simulator")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a project file. Prints nothing when it is valid.
    Validate { file: PathBuf },
    /// Run a project headless up to a horizon.
    Run(RunArgs),
    /// Serve the HTTP API and live stream for one project.
    Serve(ServeArgs),
    /// Run the line-protocol mock remote server.
    MockRemote {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub file: PathBuf,
    /// Virtual duration (`1h`, `250s`) or an absolute UTC datetime.
    #[arg(long)]
    pub until: Horizon,
    /// Real-time mode, virtual seconds per wall second.
    #[arg(long, value_parser = parse_speed, conflicts_with = "fast")]
    pub speed: Option<f64>,
    /// As fast as possible (the default).
    #[arg(long)]
    pub fast: bool,
    /// Remote server, `host:port` or `tcp://host:port`.
    #[arg(long)]
    pub remote: Option<String>,
    /// Virtual milliseconds between polls.
    #[arg(long, default_value_t = 1000, requires = "remote")]
    pub poll_ms: u64,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LogFormatArg::Csv)]
    pub log_format: LogFormatArg,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    pub file: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: String,
    /// Virtual seconds per wall second while running.
    #[arg(long, value_parser = parse_speed, default_value_t = 1.0)]
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormatArg {
    Csv,
    Jsonl,
}

impl From<LogFormatArg> for LogFormat {
    fn from(f: LogFormatArg) -> Self {
        match f {
            LogFormatArg::Csv => LogFormat::Csv,
            LogFormatArg::Jsonl => LogFormat::Jsonl,
        }
    }
}

fn parse_speed(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("speed must be positive".into())
    }
}

/// End of a run, relative to the project epoch or absolute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    After(u64),
    At(WallTime),
}

impl Horizon {
    /// Virtual end time for a project starting at `epoch`.
    pub fn resolve(self, epoch: WallTime) -> Result<SimTime, String> {
        let t = match self {
            Horizon::After(ms) => SimTime(ms),
            Horizon::At(w) => w.to_virtual(epoch).ok_or_else(|| format!("{w} is before the project epoch {epoch}"))?,
        };
        if t == SimTime::ZERO {
            return Err("horizon must be after the epoch".into());
        }
        Ok(t)
    }
}

impl FromStr for Horizon {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(d) = humantime::parse_duration(s) {
            let ms = u64::try_from(d.as_millis()).map_err(|_| "duration too long".to_string())?;
            return Ok(Horizon::After(ms));
        }
        s.parse::<WallTime>()
            .map(Horizon::At)
            .map_err(|_| format!("`{s}` is neither a duration (e.g. 1h30m) nor a UTC datetime"))
    }
}
