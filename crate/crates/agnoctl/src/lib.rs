//! Experiment driver for `agnostic-core`: reads a TOML configuration, runs one
//! experiment, and writes `results.csv`, `summary.txt` and `provenance.json`.

pub mod config;
pub mod error;
pub mod run;

pub use config::ExperimentConfig;
pub use error::AppError;
pub use run::{config_hash, run_experiment, Mode, RunOptions, RunReport};
