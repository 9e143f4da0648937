//! Experiment runner: configuration, data and posterior files, and one
//! pipeline per experiment kind.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;

pub use config::{ExperimentConfig, ExperimentKind, ModelSettings, PartialConfig};
pub use error::{CliError, Result};
pub use experiments::{run_experiment, run_pipeline, Outcome, RunArtifacts};
