//! Config-driven experiments over `gradient-core`: convergence runs,
//! chain analysis and streaming scenarios, written out as CSV tables, a
//! key=value summary and a manifest that reproduces the run.

pub mod config;
pub mod output;
pub mod run;

pub use config::{
    parse_config, parse_config_str, ConfigError, ExperimentConfig, Kind, Overrides, Plan,
};
pub use output::emit_outputs;
pub use run::{run_experiment, run_seeds, OutputFile, ResultBundle};

use thiserror::Error;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for failures while running or
    /// writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}
