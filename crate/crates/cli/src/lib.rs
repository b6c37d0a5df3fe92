//! Command-line front end for `jumplab-core`.
//!
//! Every command reads an [`ExperimentConfig`] and writes its results into
//! `outputs.dir`. Errors map onto exit codes through [`CliError::exit_code`].

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{analytic_rates, cmd_rates, cmd_simulate, cmd_zeno, RatesReport, Summary, SweepRow, SCHEMA_VERSION};
pub use config::{AutoOr, Experiment, ExperimentConfig, ModelSource, OutputConfig, RunConfig};
pub use error::CliError;
