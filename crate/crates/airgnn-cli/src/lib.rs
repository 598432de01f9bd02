//! Experiment runner over the `airgnn` library: configs, subcommands and
//! run manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{rerun, run, Command, EvalMode, RunOutcome};
pub use config::{ExperimentConfig, Task};
pub use error::{CliError, Result};
pub use manifest::RunManifest;
