//! Batch driver: reads an experiment document, runs one command and writes
//! JSON, CSV and a text report.
//!
//! Exit statuses: 0 success, 2 convergence or precision failure (including a
//! failed check), 3 configuration error, 4 regime refusal.

pub mod config;
pub mod parse;
pub mod report;
pub mod run;

pub use config::{Command, ConfigError, ExperimentConfig, Overrides};
pub use run::{run, Outcome, Status};
