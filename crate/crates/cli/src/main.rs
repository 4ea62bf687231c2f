use std::path::PathBuf;
use std::process::ExitCode;

use bayes_pce_cli::{compare_runs, load_validated, output, run, CliError, OUTPUT_ROOT_ENV};
use clap::{Parser, Subcommand};

/// Sampling-free Bayesian identification and tracking experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    Run { config: PathBuf },
    /// L¹ distances between density columns and per-step mean differences.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Write the CSV report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let (result, dir) = run(&config, &output_root())?;
            println!("{}", output::summary(&result, &dir));
        }
        Command::Compare { dir_a, dir_b, out } => {
            let report = compare_runs(&dir_a, &dir_b)?;
            match out {
                Some(p) => std::fs::write(p, report.to_csv())?,
                None => print!("{}", report.to_csv()),
            }
        }
        Command::Validate { config } => {
            load_validated(&config)?;
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
