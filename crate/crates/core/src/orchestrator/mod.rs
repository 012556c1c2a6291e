//! Experiment configuration, cached execution and report emission.

mod cache;
mod config;
mod plot;
mod pool;
mod reports;
mod runner;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use cache::{CachedResponse, RequestKey, RequestKind, RunCache, CACHE_LOG};
pub use config::{
    CorruptionEntry, CorruptionSelection, DatasetConfig, DatasetRole, EstimatorConfig,
    EstimatorRole, ExperimentConfig, Seeds, SteeringConfig,
};
pub use plot::{emit_plot_data, PlotBundle, PlotFile, PLOT_DIR};
pub use pool::run_pool;
pub use reports::{
    FailureRecord, RobustnessOutput, RunOutputs, ShortcutOutput, ShortcutRecord, SteeringOutput,
    SteeringSample,
};
pub use runner::Runner;

use crate::corruption::CorruptionError;
use crate::dataset::DatasetError;
use crate::gateway::GatewayError;
use crate::metrics::MetricsError;
use crate::taskvector::TaskVectorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    Shortcut,
    Robustness,
    Steering,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Shortcut, Experiment::Robustness, Experiment::Steering];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Shortcut => "shortcut",
            Experiment::Robustness => "robustness",
            Experiment::Steering => "steering",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run aborted: {failed} of {total} requests failed, above the {budget} budget")]
    Aborted { failed: usize, total: usize, budget: f64 },
    #[error("run cancelled")]
    Cancelled,
    #[error("{side} anchor set has {got} usable task vectors, at least {needed} required")]
    AnchorInsufficientSamples {
        side: &'static str,
        got: usize,
        needed: usize,
    },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    TaskVector(#[from] TaskVectorError),
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
    #[error("image {path}: {message}")]
    Image { path: String, message: String },
}

impl OrchestratorError {
    /// Process exit status: 2 for configuration errors, 3 for aborted runs,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            OrchestratorError::Config(_) => 2,
            OrchestratorError::Aborted { .. } => 3,
            _ => 1,
        }
    }
}
