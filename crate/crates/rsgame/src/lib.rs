//! Configuration, file formats and subcommand pipelines for the `rsgame` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod runner;

pub use commands::{run, Command, Outcome, RunError, Status};
pub use config::{ConfigError, Overrides, RunConfig};
