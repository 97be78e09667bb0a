//! Subcommands of the `dronestick` binary. Each returns a JSON summary on
//! success and a [`CliError`] carrying the offending field on failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use dronestick_core::{replay, run, ReplayReport, Scenario};
use serde_json::{json, Value};

use crate::server::{Gateway, ServeError, ServeOptions};

/// Environment variable naming the directory logs go to by default.
pub const LOG_DIR_ENV: &str = "DRONESTICK_LOG_DIR";

#[derive(Debug, Parser)]
#[command(name = "dronestick", version, about = "Flying-joystick fleet simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario headless and write its log.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Log path; defaults to <log dir>/<scenario name>.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a log against its scenario; succeeds only on an exact match.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Serve a scenario in real time to one operator over WebSocket.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        port: u16,
        /// Frames streamed per second.
        #[arg(long, default_value_t = 50.0)]
        hz: f64,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Check a scenario file against the schema and its invariants.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub field: Option<&'static str>,
    pub tick: Option<u64>,
}

impl CliError {
    pub fn new(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            field: None,
            tick: None,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.message, "field": self.field });
        if let Some(t) = self.tick {
            v["tick"] = json!(t);
        }
        v
    }
}

impl From<dronestick_core::Error> for CliError {
    fn from(e: dronestick_core::Error) -> Self {
        let tick = match e {
            dronestick_core::Error::NonFinite { tick, .. } => Some(tick),
            _ => None,
        };
        CliError {
            message: e.to_string(),
            field: e.field(),
            tick,
        }
    }
}

impl From<ServeError> for CliError {
    fn from(e: ServeError) -> Self {
        match e {
            ServeError::Engine(inner) => inner.into(),
            ServeError::StreamRate(_) => CliError {
                message: e.to_string(),
                field: Some("hz"),
                tick: None,
            },
            other => CliError::new(other.to_string()),
        }
    }
}

pub fn log_dir() -> PathBuf {
    std::env::var_os(LOG_DIR_ENV).map_or_else(|| PathBuf::from("logs"), PathBuf::from)
}

fn load(path: &Path) -> Result<Scenario, CliError> {
    Scenario::load(path).map_err(|e| {
        let mut err = CliError::from(e);
        if err.field.is_none() {
            err.message = format!("{}: {}", path.display(), err.message);
        }
        err
    })
}

pub fn simulate(scenario_path: &Path, out: Option<&Path>) -> Result<Value, CliError> {
    let scenario = load(scenario_path)?;
    let out = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let dir = log_dir();
            std::fs::create_dir_all(&dir).map_err(|e| CliError::new(format!("{}: {e}", dir.display())))?;
            let stem = scenario_path.file_stem().unwrap_or_default().to_string_lossy();
            dir.join(format!("{stem}.jsonl"))
        }
    };
    let log = run(&scenario)?;
    log.write(&out)?;
    Ok(json!({
        "frames": log.frames.len(),
        "log": out,
        "scenario_hash": log.header.scenario_hash,
        "final_mode": log.frames.last().map(|f| f.mode),
    }))
}

pub fn replay_log(log_path: &Path, scenario_path: &Path) -> Result<Value, CliError> {
    let scenario = load(scenario_path)?;
    let text = std::fs::read_to_string(log_path)
        .map_err(|e| CliError::new(format!("{}: {e}", log_path.display())))?;
    match replay(&text, &scenario)? {
        ReplayReport::ExactMatch { frames, complete } => Ok(json!({
            "result": "exact match",
            "frames": frames,
            "complete": complete,
        })),
        diverged @ ReplayReport::Diverged { tick, .. } => Err(CliError {
            message: diverged.to_string(),
            field: None,
            tick: Some(tick),
        }),
    }
}

pub fn validate(scenario_path: &Path) -> Result<Value, CliError> {
    let scenario = load(scenario_path)?;
    Ok(json!({
        "valid": true,
        "scenario_hash": format!("{:016x}", scenario.hash()),
        "ticks": scenario.tick_count(),
        "followers": scenario.fleet.members.len(),
    }))
}

/// Serves until the scenario ends. `on_listen` receives the bound address line.
pub fn serve(
    scenario_path: &Path,
    host: &str,
    port: u16,
    hz: f64,
    on_listen: impl FnOnce(Value),
) -> Result<Value, CliError> {
    let scenario = load(scenario_path)?;
    let options = ServeOptions {
        stream_hz: hz,
        log_dir: log_dir(),
        ..ServeOptions::default()
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new(e.to_string()))?;
    rt.block_on(async {
        let gateway = Gateway::bind(&format!("{host}:{port}"), scenario, options).await?;
        let addr = gateway.local_addr().map_err(ServeError::from)?;
        on_listen(json!({ "listening": addr.to_string() }));
        let summary = gateway.run().await?;
        Ok(serde_json::to_value(summary).expect("summary serializes"))
    })
}

pub fn execute(command: &Command) -> Result<Value, CliError> {
    match command {
        Command::Simulate { scenario, out } => simulate(scenario, out.as_deref()),
        Command::Replay { log, scenario } => replay_log(log, scenario),
        Command::Validate { scenario } => validate(scenario),
        Command::Serve {
            scenario,
            port,
            hz,
            host,
        } => serve(scenario, host, *port, *hz, |line| {
            println!("{line}");
        }),
    }
}
