//! Configuration, command dispatch and report emission for the
//! `delay-consensus` tool.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig, SchemaError};
pub use report::{CertificateFile, Finding, Level, RunReport};
pub use run::{run_command, Command, Format, Outcome, RunOptions};
