//! Estimator disagreement, shortcut impact and MAE.

use serde::{Deserialize, Serialize};

use super::stats::MeanSem;
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetTag {
    Known,
    Unknown,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedPrediction {
    pub id: String,
    pub f_pred: u32,
    pub g_pred: u32,
}

/// Predictions of the evaluated estimator `f` and a surrogate `g` on one subset.
/// Parse failures are filtered out before construction and only counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedPredictions {
    pub entries: Vec<PairedPrediction>,
    pub subset: SubsetTag,
}

/// Mean and SEM of `|f_pred - g_pred|`.
pub fn mean_abs_disagreement(pairs: &PairedPredictions) -> Result<MeanSem, MetricsError> {
    let diffs: Vec<f64> = pairs
        .entries
        .iter()
        .map(|p| f64::from(p.f_pred.abs_diff(p.g_pred)))
        .collect();
    MeanSem::of(&diffs)
}

/// Mean and SEM of `|pred - label|`.
pub fn mae(predictions: &[(i64, i64)]) -> Result<MeanSem, MetricsError> {
    let errors: Vec<f64> = predictions
        .iter()
        .map(|&(p, l)| p.abs_diff(l) as f64)
        .collect();
    MeanSem::of(&errors)
}

/// Disagreement on the known subset (`delta_plus_E`), on the unknown subset
/// (`E`), and their difference `delta_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutReport {
    #[serde(rename = "delta_plus_E")]
    pub delta_plus_e: MeanSem,
    #[serde(rename = "E")]
    pub e: MeanSem,
    pub delta_k: f64,
    /// `|delta_k|` exceeds the sum of both standard errors.
    pub significant: bool,
    pub n_known: usize,
    pub n_unknown: usize,
    pub parse_failure_count: usize,
}

impl ShortcutReport {
    pub fn with_counts(mut self, n_known: usize, n_unknown: usize, parse_failures: usize) -> Self {
        self.n_known = n_known;
        self.n_unknown = n_unknown;
        self.parse_failure_count = parse_failures;
        self
    }
}

pub fn shortcut_impact(on_known: MeanSem, on_unknown: MeanSem) -> ShortcutReport {
    let delta_k = on_known.mean - on_unknown.mean;
    ShortcutReport {
        delta_plus_e: on_known,
        e: on_unknown,
        delta_k,
        significant: delta_k.abs() > on_known.sem + on_unknown.sem,
        n_known: 0,
        n_unknown: 0,
        parse_failure_count: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(values: &[(u32, u32)]) -> PairedPredictions {
        PairedPredictions {
            entries: values
                .iter()
                .enumerate()
                .map(|(i, &(f, g))| PairedPrediction {
                    id: i.to_string(),
                    f_pred: f,
                    g_pred: g,
                })
                .collect(),
            subset: SubsetTag::All,
        }
    }

    #[test]
    fn disagreement_examples() {
        let m = mean_abs_disagreement(&pairs(&[(10, 12), (20, 17)])).unwrap();
        assert_eq!(m.mean, 2.5);
        assert_eq!(m, MeanSem::of(&[2.0, 3.0]).unwrap());
        let same = mean_abs_disagreement(&pairs(&[(30, 30), (41, 41)])).unwrap();
        assert_eq!((same.mean, same.sem), (0.0, 0.0));
        assert_eq!(
            mean_abs_disagreement(&pairs(&[])),
            Err(MetricsError::EmptyInput)
        );
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[(20, 25), (30, 25)]).unwrap(), MeanSem { mean: 5.0, sem: 0.0 });
        assert_eq!(mae(&[(7, 7), (9, 9)]).unwrap(), MeanSem { mean: 0.0, sem: 0.0 });
    }

    #[test]
    fn impact_examples() {
        let r = shortcut_impact(
            MeanSem { mean: 7.82, sem: 0.37 },
            MeanSem { mean: 7.89, sem: 0.32 },
        );
        assert!((r.delta_k + 0.07).abs() < 1e-12);
        assert!(!r.significant);
        let same = MeanSem { mean: 3.0, sem: 0.1 };
        assert_eq!(shortcut_impact(same, same).delta_k, 0.0);
    }

    #[test]
    fn report_field_names() {
        let r = shortcut_impact(MeanSem { mean: 1.0, sem: 0.0 }, MeanSem { mean: 0.5, sem: 0.0 });
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("delta_plus_E").is_some() && json.get("E").is_some());
    }
}
