//! `spikefield` command-line driver.
//!
//! Exit codes: 0 success, 2 regime guard violated, 3 some run truncated by
//! its event cap (outputs are still written), 1 any other error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{code, CliError};
use crate::output::{Envelope, OutputDir, Report, SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "spikefield",
    version,
    about = "Simulate and analyse mean-field spiking networks"
)]
struct Cli {
    /// Root seed of every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Configuration overrides such as `--model.n=200` or `--ldp.ns=[20,40]`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one network and record its spikes and mean-rate trajectory.
    Simulate(Overrides),
    /// Sample extinction times of independent networks.
    Extinction(Overrides),
    /// Sample exit times from a mean-rate domain and test exponentiality.
    ExitTimes(Overrides),
    /// Solve for the equilibrium rate and invariant density.
    Meanfield(Overrides),
    /// Classify a grid of (a, b) points of the phase diagram.
    Phase(Overrides),
    /// Quasi-potential bounds and the extinction-time scaling experiment.
    Ldp(Overrides),
    /// Run one of the shared-noise couplings.
    Couple(Overrides),
}

type Runner = fn(&RunConfig, &OutputDir) -> Result<Report, CliError>;

impl Command {
    fn parts(&self) -> (&'static str, &Overrides, Runner) {
        match self {
            Command::Simulate(o) => ("simulate", o, commands::simulate),
            Command::Extinction(o) => ("extinction", o, commands::extinction),
            Command::ExitTimes(o) => ("exit-times", o, commands::exit_times),
            Command::Meanfield(o) => ("meanfield", o, commands::meanfield),
            Command::Phase(o) => ("phase", o, commands::phase),
            Command::Ldp(o) => ("ldp", o, commands::ldp),
            Command::Couple(o) => ("couple", o, commands::couple),
        }
    }
}

/// The model section and the experiment's own section of the config.
fn config_echo(cfg: &RunConfig, experiment: &str) -> serde_json::Value {
    let full = serde_json::to_value(cfg).expect("config serializes");
    let section = experiment.replace('-', "_");
    let mut echo = serde_json::Map::new();
    for key in ["seed", "threads", "out", "model", section.as_str()] {
        if let Some(v) = full.get(key) {
            echo.insert(key.into(), v.clone());
        }
    }
    serde_json::Value::Object(echo)
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let (experiment, overrides, cmd) = cli.command.parts();
    let mut cfg = config::load(cli.config.as_deref(), &overrides.set)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Setting(format!("thread pool: {e}")))?;
    let out = OutputDir::create(&cfg.out)?;
    let started = Instant::now();
    let report = pool.install(|| cmd(&cfg, &out))?;
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: config_echo(&cfg, experiment),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        experiment,
        payload: report.payload,
        units: report
            .units
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    };
    out.summary(&envelope)?;
    if report.partial {
        eprintln!("warning: some runs hit their event cap; results are partial");
        Ok(code::PARTIAL)
    } else {
        Ok(code::OK)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
