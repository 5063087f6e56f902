//! `dmdc`: windowed dynamic-mode features for session-level classification.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dmdc_core::corpus::ScoreKey;
use dmdc_core::eval::grid::with_jobs;
use dmdc_core::Error;

use commands::Status;
use config::{CommonArgs, RunConfig};

#[derive(Parser)]
#[command(name = "dmdc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus and its manifest.
    Synth,
    /// Write per-window features, spectrum diagnostics and labels.
    Featurize,
    /// Run the cross-validated grid and write the result tables.
    Evaluate,
    /// Write only the bootstrap baseline tables.
    Baseline,
    /// Cumulative positive-window count for one session.
    Trajectory {
        /// Session to trace.
        #[arg(long)]
        session: String,
        /// Score whose stored model is used.
        #[arg(long, default_value = "ctrs")]
        score: ScoreKey,
    },
}

const EXIT_PARTIAL: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;

fn run(cli: Cli) -> Result<Status, Error> {
    let cfg = RunConfig::resolve(&cli.common)?;
    with_jobs(cfg.jobs, || match &cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Featurize => commands::featurize(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Baseline => commands::baseline(&cfg),
        Command::Trajectory { session, score } => commands::trajectory_cmd(&cfg, session, *score),
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(EXIT_PARTIAL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_IO })
        }
    }
}
