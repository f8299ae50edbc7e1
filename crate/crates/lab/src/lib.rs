//! Command-line laboratory for `dampwave-core`: configuration files,
//! subcommand dispatch and result emission.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{emit_config, parse_config, Command, RunConfig};
pub use error::{LabError, LabResult};
pub use output::{Artifacts, Status, Verdict};
