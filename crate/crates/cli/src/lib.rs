//! Experiment runner: configuration, batch execution and result tables.

pub mod config;
pub mod rows;
pub mod run;

pub use config::{Experiment, ExperimentConfig, Format};
pub use rows::{emit, ResultRow};
pub use run::run_experiment;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run aborted: {0}")]
    Runtime(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Output(_) => 4,
        }
    }
}
