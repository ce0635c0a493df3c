//! `maxineq`: run maximal-inequality verifications and strong-law
//! diagnostics from a JSON config.
//!
//! Exit codes: 0 success (including an unmet precondition), 2 config error,
//! 3 budget error, 4 inequality falsified, 1 i/o failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "maxineq", version, about = "Maximal inequality and strong-law workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the maximal inequality on every ε of the ladder.
    VerifyMaxIneq {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the strong-law conditions and write one report each.
    CheckConditions {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate normalized partial sums over seeds.
    SllnExperiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare Monte Carlo intervals with exact enumeration.
    OracleCompare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<commands::Outcome, error::CliError> {
        match &cli.command {
            Command::VerifyMaxIneq { config, out } => commands::verify(&RunConfig::load(config)?, out),
            Command::CheckConditions { config, out } => commands::check_conditions(&RunConfig::load(config)?, out),
            Command::SllnExperiment { config, out } => commands::slln_experiment(&RunConfig::load(config)?, out),
            Command::OracleCompare { config, out } => commands::oracle_compare(&RunConfig::load(config)?, out.as_deref()),
        }
    };
    match run() {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.falsified {
                eprintln!("inequality falsified");
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
