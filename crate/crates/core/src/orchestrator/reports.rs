//! Report types written by the experiments. Latency never appears in a
//! report, so a rerun served from the cache writes identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::metrics::{MeanSem, RobustnessReport, ShortcutReport};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureRecord {
    pub dataset: String,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<String>,
    pub estimator: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutRecord {
    pub id: String,
    pub known: bool,
    pub label: Option<u32>,
    pub subject_pred: Option<u32>,
    pub surrogate_pred: Option<u32>,
}

impl ShortcutRecord {
    pub fn subject_error(&self) -> Option<f64> {
        Some(f64::from(self.subject_pred?.abs_diff(self.label?)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutOutput {
    pub dataset: String,
    pub subject: String,
    pub surrogate: String,
    pub report: ShortcutReport,
    /// Subject MAE against the age labels, per subset.
    pub subject_mae_known: Option<MeanSem>,
    pub subject_mae_unknown: Option<MeanSem>,
    pub failed_requests: usize,
    pub records: Vec<ShortcutRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessOutput {
    pub estimator: String,
    pub corruption_seed: u64,
    pub report: RobustnessReport,
    /// Pairs dropped because the base or the corrupted answer did not parse.
    pub parse_failure_count: usize,
    pub failed_requests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringSample {
    pub id: String,
    pub label: Option<u32>,
    pub default_pred: Option<u32>,
    pub steered_pred: Option<u32>,
    /// `|steered - label| - |default - label|`.
    pub error_delta: Option<i64>,
    /// Anchor-axis projection of the sample's task vector.
    pub delta_k: Option<f64>,
    pub member: Option<bool>,
}

impl SteeringSample {
    pub fn errors(&self) -> Option<(i64, i64)> {
        let label = i64::from(self.label?);
        Some((
            (i64::from(self.default_pred?) - label).abs(),
            (i64::from(self.steered_pred?) - label).abs(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringOutput {
    pub dataset: String,
    pub estimator: String,
    pub alpha: f64,
    pub steering_fingerprint: String,
    pub default_mae: Option<MeanSem>,
    pub steered_mae: Option<MeanSem>,
    /// Steered minus default mean error.
    pub mae_difference: Option<f64>,
    /// Fraction of samples whose task vector sits in the known distribution.
    pub shortcut_ratio: Option<f64>,
    pub n_anchor_known: usize,
    pub n_anchor_unknown: usize,
    pub failed_requests: usize,
    pub samples: Vec<SteeringSample>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOutputs {
    pub shortcut: Vec<ShortcutOutput>,
    pub robustness: Vec<RobustnessOutput>,
    pub steering: Vec<SteeringOutput>,
}

/// Pretty JSON with a trailing newline. Maps are ordered and floats use the
/// shortest round-trip form, so equal values give equal bytes.
pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OrchestratorError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| OrchestratorError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| OrchestratorError::Io(format!("{}: {e}", path.display())))
}

pub(crate) fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), OrchestratorError> {
    let err = |e: csv::Error| OrchestratorError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| OrchestratorError::Io(format!("{}: {e}", path.display())))
}

/// File-name-safe form of a model or dataset name.
pub(crate) fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}
