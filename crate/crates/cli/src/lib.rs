//! Command-line front end: configs, presets, report files and the
//! subcommands behind the `skewlimit` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod presets;
pub mod report;

pub use commands::{Outcome, Source};
pub use config::{ConfigError, ExperimentConfig, Format};
pub use error::{exit_code, CliError, Exit};
pub use report::Table;
