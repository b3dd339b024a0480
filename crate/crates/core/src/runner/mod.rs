//! Config-driven experiments behind the command-line tool.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use commands::{cmd_agp, cmd_evolve, cmd_lanczos, Experiment};
pub use config::Config;
pub use output::{Format, Report};
