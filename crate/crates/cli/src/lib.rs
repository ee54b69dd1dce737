//! The `fxcast` command-line harness: experiment config, the four
//! subcommands and seeded synthetic fixtures.

pub mod commands;
pub mod config;
pub mod error;
pub mod synth;

pub use commands::{cmd_compare, cmd_predict, cmd_stats, cmd_train};
pub use config::{ExperimentConfig, Overrides};
pub use error::{exit, CliError, CliResult};
