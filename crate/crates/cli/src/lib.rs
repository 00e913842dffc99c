//! Experiment runner for the early-exit simulator.
//!
//! Every command reads an [`ExperimentConfig`], validates it in full, and
//! writes CSV data and JSON summaries into the output directory. Each file
//! starts with the effective config, and a fixed seed gives identical bytes.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use cli::{Cli, Command};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
