//! `roadid`: simulate drives, estimate road profiles from axle
//! accelerations, tune and compare estimators.

mod commands;
mod config;
mod svg;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{EstimatorKind, RunConfig};

#[derive(Parser)]
#[command(name = "roadid", version, about = "Road-roughness identification from vehicle accelerations")]
struct Cli {
    /// TOML run configuration, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for both the generated road and the sensor noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for tune and compare [default: available cores].
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Vehicle speed [km/h].
    #[arg(long, global = true)]
    speed_kmh: Option<f64>,
    /// Also render SVG charts next to the CSV outputs.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a road, drive over it and record the accelerations.
    Simulate,
    /// Estimate wheel profiles from a measurement CSV.
    Estimate {
        measurements: PathBuf,
        /// True inputs (`t_s,r_front_m,r_rear_m`) for accuracy metrics.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorKind>,
    },
    /// Grid-search the noise level and truncation (or input noise) by the
    /// tuning error.
    Tune {
        #[arg(long, value_enum)]
        estimator: Option<EstimatorKind>,
        /// Tune on a recorded measurement file instead of the simulated
        /// scenario.
        #[arg(long)]
        measurements: Option<PathBuf>,
    },
    /// Accuracy and run time of the smoother against the window length.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        windows: Vec<usize>,
    },
    /// Run every estimator on the simulated scenario.
    Compare,
}

/// Failure of a command. Configuration problems exit with 2, everything
/// else with 1.
#[derive(Debug)]
pub struct CliError {
    config: bool,
    message: String,
}

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        Self {
            config: true,
            message: msg.to_string(),
        }
    }

    pub fn run(msg: impl fmt::Display) -> Self {
        Self {
            config: false,
            message: msg.to_string(),
        }
    }
}

impl From<roadid_core::Error> for CliError {
    fn from(e: roadid_core::Error) -> Self {
        Self::run(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(v) = cli.speed_kmh {
        cfg.scenario.speed_kmh = v;
    }
    cfg.validate()?;
    let workers = match cli.workers {
        Some(0) => return Err(CliError::config("--workers must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::run(format!("cannot create {}: {e}", cli.out.display())))?;
    let ctx = commands::Context {
        cfg,
        out: cli.out,
        workers,
        svg: cli.svg,
        argv: std::env::args().collect(),
    };
    match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Estimate {
            measurements,
            truth,
            estimator,
        } => commands::estimate(&ctx, &measurements, truth.as_deref(), estimator),
        Command::Tune {
            estimator,
            measurements,
        } => commands::tune(&ctx, estimator, measurements.as_deref()),
        Command::Sweep { windows } => commands::sweep(&ctx, &windows),
        Command::Compare => commands::compare(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.config { 2 } else { 1 })
        }
    }
}
