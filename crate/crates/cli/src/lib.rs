//! Experiment runner behind the `chernoff-evolve` binary.

use std::path::PathBuf;

pub mod config;
pub mod emit;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind, Observable, ProbeTarget};
pub use runner::{compute, run_experiment, Check, Outcome, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical error: {0}")]
    Numeric(#[from] chernoff_core::Error),
}
