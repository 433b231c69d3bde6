//! Experiment harness: config loading, presets, report bundles, the drift
//! study, and the drivers behind the `qsync` CLI.

pub mod config;
pub mod drift;
pub mod report;
pub mod runner;

use thiserror::Error;

pub use config::{preset, ScenarioConfig, PRESET_NAMES};
pub use report::{ReportBundle, Summary};
pub use runner::{attack_demo, optimize_t, run_scenario, serve_scenario, RunArtifacts};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Sync(#[from] qsync_core::SyncError),
    #[error(transparent)]
    Plan(#[from] qsync_core::PlanError),
    #[error(transparent)]
    Link(#[from] qsync_link::LinkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Argument(String),
}

impl From<qsync_core::SourceError> for HarnessError {
    fn from(e: qsync_core::SourceError) -> Self {
        HarnessError::Sync(qsync_core::SyncError::Source(e))
    }
}
