//! Command-line front end: configuration parsing, the end-to-end pricing
//! pipeline and the report writers behind each subcommand.

pub mod commands;
pub mod config;
pub mod pipeline;

pub use config::{ConfigError, OutputFormat, RunConfig, SimSettings};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const NO_EXERCISE_REGION: i32 = 4;
}
