//! Library side of the `chainbath` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{Resolved, RunConfig, Solver};
pub use error::CliError;
