use std::process::ExitCode;

use clap::Parser;
use log::error;

use smarthouse_cli::args::{Cli, Command, RunArgs, ServeArgs};
use smarthouse_cli::commands::{self, RunOptions};
use smarthouse_cli::{serve, Failure};
use smarthouse_core::engine::ClockMode;
use smarthouse_core::link::LinkConfig;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { file } => commands::validate(&file),
        Command::Run(args) => {
            let summary = commands::run(&run_options(args)?)?;
            println!("{summary}");
            Ok(())
        }
        Command::Serve(args) => serve_blocking(args),
        Command::MockRemote { listen } => commands::mock_remote(&listen),
    }
}

fn run_options(args: RunArgs) -> Result<RunOptions, Failure> {
    let mode = match args.speed {
        Some(speed) => ClockMode::RealTime { speed },
        None => ClockMode::Fast,
    };
    let remote = match args.remote {
        Some(endpoint) => Some(LinkConfig::new(endpoint, args.poll_ms, "smarthouse")?),
        None => None,
    };
    Ok(RunOptions {
        project: args.file,
        until: args.until,
        mode,
        remote,
        log: args.log.map(|p| (p, args.log_format.into())),
    })
}

fn serve_blocking(args: ServeArgs) -> Result<(), Failure> {
    let project = smarthouse_core::persistence::load_project(&args.file)?;
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.listen)
            .await
            .map_err(|e| Failure::io(anyhow::anyhow!("cannot bind {}: {e}", args.listen)))?;
        let state = serve::AppState::new(project, Some(args.file), args.speed)?;
        println!("serving on http://{}", listener.local_addr().map_err(Failure::io)?);
        let shutdown = async {
            if let Err(e) = tokio::signal::ctrl_c().await {
                error!("cannot listen for ctrl-c: {e}");
                std::future::pending::<()>().await;
            }
        };
        serve::serve(listener, state, shutdown).await.map_err(Failure::io)
    })
}
