//! `stsir`: fit, compare, diagnose and forecast space-time SIR models.

mod commands;
mod config;
mod fail;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Mode, Overrides};

#[derive(Debug, Parser)]
#[command(name = "stsir", version, about = "Bayesian space-time SIR models for county case panels")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the sampler or scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `smoothed` fits the log-normal model to 3-day centered averages.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Independent chains, seeded `seed, seed + 1, ...`.
    #[arg(long, global = true, default_value_t = 1)]
    chains: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model and write traces, summaries and fit profiles.
    Fit,
    /// Fit several configurations on the same panel and rank them by DIC.
    Compare {
        /// Further configurations, compared with `--config` if given.
        configs: Vec<PathBuf>,
    },
    /// One-day-ahead forecast from stored traces.
    Predict {
        /// Trace files; defaults to the chain traces in the output directory.
        #[arg(long)]
        trace: Vec<PathBuf>,
    },
    /// Simulate a panel from a scenario and write it in the input formats.
    Simulate {
        scenario: PathBuf,
    },
    /// Recompute DIC, Geweke scores and summaries from stored traces.
    Diagnose {
        #[arg(long)]
        trace: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        mode: cli.mode,
    };
    let res = if cli.chains == 0 {
        Err(fail::Failure::config("--chains must be at least 1"))
    } else {
        let need = |c: &Option<PathBuf>| {
            c.clone().ok_or_else(|| fail::Failure::config("--config is required"))
        };
        match &cli.command {
            Command::Fit => need(&cli.config).and_then(|c| commands::fit(&c, &ov, cli.chains)),
            Command::Compare { configs } => {
                let all: Vec<PathBuf> = cli.config.iter().cloned().chain(configs.iter().cloned()).collect();
                commands::compare(&all, &ov, cli.chains)
            }
            Command::Predict { trace } => {
                need(&cli.config).and_then(|c| commands::predict(&c, &ov, cli.chains, trace))
            }
            Command::Simulate { scenario } => commands::simulate(scenario, &ov),
            Command::Diagnose { trace } => {
                need(&cli.config).and_then(|c| commands::diagnose(&c, &ov, cli.chains, trace))
            }
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
