//! Command-line front end: file formats and the solve, round, export, eval
//! and scenario commands.

pub mod args;
pub mod commands;
pub mod error;
pub mod formats;

pub use args::Cli;
pub use commands::run;
pub use error::{CliError, CliResult};
