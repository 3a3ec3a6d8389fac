//! Command-line front end for the cascade simulator: configuration files and
//! one report per subcommand.

pub mod commands;
pub mod config;

pub use commands::{run, Command};
pub use config::{parse_config, ConfigError, Format, RunConfig};
