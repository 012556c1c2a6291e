//! Normalized prediction deviations under corruption.
//!
//! Each record's deviation `|base - corrupted|` is divided by the largest
//! deviation seen for the same corruption (`kind@severity`) across every record
//! of every dataset. Corruptions that never moved a prediction have no
//! normalizer; they are reported as diagnostics and left out of all means.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{kahan_sum, MeanSem};
use super::MetricsError;
use crate::corruption::CorruptionSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub corruption: CorruptionSpec,
    pub id: String,
    pub dataset: String,
    pub base_pred: u32,
    pub corrupted_pred: u32,
}

impl DeviationRecord {
    pub fn deviation(&self) -> u32 {
        self.base_pred.abs_diff(self.corrupted_pred)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRobustness {
    /// Mean normalized deviation over all retained records of the dataset.
    pub mean_normalized_deviation: f64,
    /// Standard error across the per-corruption means.
    pub sem_over_corruptions: f64,
    pub n_records: usize,
    /// Per-corruption mean normalized deviation, keyed by `kind@severity`.
    pub per_corruption: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub per_dataset: BTreeMap<String, DatasetRobustness>,
    /// Global maximum deviation per corruption; only positive values appear.
    pub normalizers: BTreeMap<String, f64>,
    /// Corruptions excluded because their maximum deviation was zero.
    pub zero_normalizer: Vec<String>,
}

pub fn robustness_profile(records: &[DeviationRecord]) -> Result<RobustnessReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut max_dev: BTreeMap<String, u32> = BTreeMap::new();
    for r in records {
        let slot = max_dev.entry(r.corruption.label()).or_insert(0);
        *slot = (*slot).max(r.deviation());
    }
    let normalizers: BTreeMap<String, f64> = max_dev
        .iter()
        .filter(|(_, &m)| m > 0)
        .map(|(k, &m)| (k.clone(), f64::from(m)))
        .collect();
    let zero_normalizer: Vec<String> = max_dev
        .iter()
        .filter(|(_, &m)| m == 0)
        .map(|(k, _)| k.clone())
        .collect();

    // dataset -> corruption -> normalized deviations
    let mut grouped: BTreeMap<&str, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in records {
        let label = r.corruption.label();
        if let Some(&norm) = normalizers.get(&label) {
            grouped
                .entry(r.dataset.as_str())
                .or_default()
                .entry(label)
                .or_default()
                .push(f64::from(r.deviation()) / norm);
        }
    }

    let mut per_dataset = BTreeMap::new();
    for (dataset, by_corruption) in grouped {
        let per_corruption: BTreeMap<String, f64> = by_corruption
            .iter()
            .map(|(label, v)| (label.clone(), kahan_sum(v.iter().copied()) / v.len() as f64))
            .collect();
        let all: Vec<f64> = by_corruption.values().flatten().copied().collect();
        let levels: Vec<f64> = per_corruption.values().copied().collect();
        per_dataset.insert(
            dataset.to_string(),
            DatasetRobustness {
                mean_normalized_deviation: MeanSem::of(&all)?.mean,
                sem_over_corruptions: MeanSem::of(&levels)?.sem,
                n_records: all.len(),
                per_corruption,
            },
        );
    }

    Ok(RobustnessReport {
        per_dataset,
        normalizers,
        zero_normalizer,
    })
}
