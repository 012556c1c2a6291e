//! Statistics over estimator outputs.
//!
//! All reductions use compensated summation, so results do not depend on the
//! order in which records arrive.

pub mod density;
pub mod robustness;
pub mod shortcut;
pub mod stats;

use thiserror::Error;

pub use density::{bimodality_score, error_density, DensityCurve, DENSITY_GRID_POINTS};
pub use robustness::{robustness_profile, DatasetRobustness, DeviationRecord, RobustnessReport};
pub use shortcut::{
    mae, mean_abs_disagreement, shortcut_impact, PairedPrediction, PairedPredictions,
    ShortcutReport, SubsetTag,
};
pub use stats::MeanSem;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("statistic needs at least one value")]
    EmptyInput,
    #[error("density needs at least two distinct values, got {0}")]
    DegenerateInput(usize),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
}
