//! Declarative experiment runner for the `bayes-pce` toolkit.
//!
//! A TOML config names one of three experiments (`scalar-identify`,
//! `lorenz84-track`, `diffusion1d-identify`); [`run`] executes it and writes
//! `manifest.json`, `history.csv`, `posterior_pdf.csv`, `error.csv`,
//! `observations.csv` and coefficient dumps. [`compare_runs`] reports L¹
//! distances between the density columns of two runs.

// `!(x > 0.0)` is used on purpose below: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

use std::path::{Path, PathBuf};

pub use compare::{compare_runs, CompareReport};
pub use config::Config;
pub use error::CliError;
pub use experiment::{run_experiment, RunResult};

/// Environment variable overriding the directory that relative
/// `output.dir` values are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "BAYES_PCE_OUTPUT_ROOT";

/// Loads and validates a config file; returns it with its directory.
pub fn load_validated(config_path: &Path) -> Result<(Config, PathBuf), CliError> {
    let cfg = Config::load(config_path)?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate(&base)?;
    Ok((cfg, base))
}

/// Runs a config file, writing artifacts under `output_root`. Nothing is
/// written unless the whole run succeeds.
pub fn run(config_path: &Path, output_root: &Path) -> Result<(RunResult, PathBuf), CliError> {
    let (cfg, base) = load_validated(config_path)?;
    let result = run_experiment(&cfg, &base)?;
    let dir = Config::resolve_path(output_root, &result.config.output.dir);
    let dir = output::write_run(&result, &dir)?;
    Ok((result, dir))
}
