//! Command-line front end: config files, run orchestration and file export.

pub mod commands;
pub mod config;
pub mod export;

pub use commands::{CliError, Exit, ExportFormat};
pub use config::{ConfigError, RunConfig};
