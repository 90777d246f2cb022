//! File-based runner for the phonon-core scenarios: configuration with
//! unit suffixes, parallel evaluation, CSV tables and a run manifest.

pub mod config;
pub mod output;
pub mod run;
pub mod units;

use std::path::PathBuf;

pub use config::{Overrides, RunConfig, ScenarioKind};
pub use run::{run, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numerical failure: {0}")]
    Numerical(phonon_core::Error),
    #[error("invalid parameters: {0}")]
    Model(phonon_core::Error),
}

impl From<phonon_core::Error> for SimError {
    fn from(e: phonon_core::Error) -> Self {
        match e {
            phonon_core::Error::NonConvergence { .. } => SimError::Numerical(e),
            other => SimError::Model(other),
        }
    }
}

impl SimError {
    /// 1 for anything the user can fix in the configuration or
    /// environment, 2 when the integrator gave up.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Numerical(_) => 2,
            _ => 1,
        }
    }
}
