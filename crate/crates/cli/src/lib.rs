//! Batch front end for sigmacell: config parsing, campaign orchestration and
//! artifact emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

pub use commands::{mass_run, run_command, Command, MassRun, Overrides, RunOutcome, TableFile};
pub use config::{parse_config, parse_config_str, Config, ConfigError};
pub use error::CliError;
pub use manifest::{RunManifest, MANIFEST_NAME};
