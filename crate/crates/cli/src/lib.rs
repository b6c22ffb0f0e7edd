//! Scenario runner: config parsing, command execution and CSV/SVG output.

pub mod config;
pub mod run;
mod svg;

pub use config::{parse_config, Command, ConfigError, ScenarioConfig, SweepSpec};
pub use run::{run, RunArtifacts, RunError, RunOptions};
