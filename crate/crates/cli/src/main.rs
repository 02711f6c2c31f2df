use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use coxrate_cli::commands::{self, Scenario};
use coxrate_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "coxrate", version, about = "Cox rate-and-state seismicity pipeline")]
struct Cli {
    /// Run configuration (TOML key = value pairs); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic catalogue, pressure observations and production.
    Simulate,
    /// Fit the pressure trend and the rate parameters, with bootstrap intervals.
    Fit,
    /// Binned Pearson residuals of a fit.
    Diagnose {
        /// Fit report supplying the parameters (default: fit.json in the output directory).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Posterior MALA chains of the pressure noise per cell.
    Monitor {
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Posterior-predictive risk map and count histogram for the next interval.
    Forecast {
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Delta-method rate moments against Monte Carlo intervals.
    Moments {
        #[arg(long, value_enum)]
        scenario: Scenario,
        /// Number of simulated trajectories.
        #[arg(long, default_value_t = 500)]
        n: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let mut c = RunConfig::default();
            c.resolve_paths(&std::env::current_dir()?);
            c
        }
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg.seed = seed;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, seed),
        Command::Fit => commands::fit(&cfg, seed),
        Command::Diagnose { params } => commands::diagnose(&cfg, seed, params.as_deref()),
        Command::Monitor { params } => commands::monitor(&cfg, seed, params.as_deref()),
        Command::Forecast { params } => commands::forecast(&cfg, seed, params.as_deref()),
        Command::Moments { scenario, n } => commands::moments(&cfg, seed, scenario, n),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
