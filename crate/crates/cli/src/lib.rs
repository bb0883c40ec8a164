//! Scenario runner for the `hh` command: config parsing, dispatch and CSV/JSON
//! emission.

pub mod config;
pub mod emit;
pub mod run;

pub use config::{parse_config, Command, ConfigError, Scenario};
pub use run::{run, Outcome, RunError, RunOptions};
