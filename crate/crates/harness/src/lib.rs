//! Command-line harness around `bearing-core`: config files, trace files and the
//! `bearing-obs` subcommands.
//!
//! Exit codes are stable: 0 success, 1 analysis failure, 2 input or validation
//! error, 3 runtime fault.

pub mod commands;
pub mod config;
pub mod trace_io;

pub use commands::run;
pub use config::RunConfig;

/// Exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const ANALYSIS_FAILURE: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const RUNTIME: i32 = 3;
}

/// Environment variable overriding the config seed (a `--seed` flag wins over it).
pub const SEED_ENV: &str = "BEARING_OBS_SEED";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("runtime fault: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Input(_) => exit::INPUT,
            CliError::Runtime(_) | CliError::Io(_) => exit::RUNTIME,
        }
    }
}
