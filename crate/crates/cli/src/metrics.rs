use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Subcommand;
use serde::Deserialize;
use shortcut_probe_core::corruption::{CorruptionKind, CorruptionSpec, Severity};
use shortcut_probe_core::metrics::{
    bimodality_score, error_density, mae, mean_abs_disagreement, robustness_profile,
    shortcut_impact, DeviationRecord, PairedPrediction, PairedPredictions, SubsetTag,
};

use crate::{emit, read_csv};

#[derive(Subcommand)]
pub enum MetricsCommand {
    /// Shortcut impact from paired predictions (`id,f_pred,g_pred` CSVs).
    Shortcut {
        #[arg(long)]
        known: PathBuf,
        #[arg(long)]
        unknown: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized robustness profile from deviation records
    /// (`dataset,id,corruption,base_pred,corrupted_pred[,seed]`, corruption as `kind@severity`).
    Robustness {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean absolute error from a `pred,label` CSV.
    Mae {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Error density and bimodality score from an `error` CSV.
    Density {
        #[arg(long)]
        errors: PathBuf,
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Also write the 256-point curve here as `error,density` CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
}

#[derive(Deserialize)]
struct DeviationRow {
    dataset: String,
    id: String,
    corruption: String,
    base_pred: u32,
    corrupted_pred: u32,
    #[serde(default)]
    seed: u64,
}

fn paired(path: &PathBuf, subset: SubsetTag) -> Result<PairedPredictions> {
    Ok(PairedPredictions {
        entries: read_csv::<PairedPrediction>(path)?,
        subset,
    })
}

fn parse_label(label: &str, seed: u64) -> Result<CorruptionSpec> {
    let (kind, severity) = label
        .split_once('@')
        .with_context(|| format!("corruption `{label}` is not `kind@severity`"))?;
    let kind: CorruptionKind = kind.parse()?;
    let severity: f64 = severity.parse().with_context(|| format!("severity in `{label}`"))?;
    Ok(CorruptionSpec {
        kind,
        severity: Severity::from_f64(severity)?,
        seed,
    })
}

pub fn dispatch(cmd: MetricsCommand) -> Result<()> {
    match cmd {
        MetricsCommand::Shortcut { known, unknown, out } => {
            let k = paired(&known, SubsetTag::Known)?;
            let u = paired(&unknown, SubsetTag::Unknown)?;
            let report = shortcut_impact(mean_abs_disagreement(&k)?, mean_abs_disagreement(&u)?)
                .with_counts(k.entries.len(), u.entries.len(), 0);
            emit(&report, out.as_deref())
        }
        MetricsCommand::Robustness { records, out } => {
            let rows: Vec<DeviationRow> = read_csv(&records)?;
            let records = rows
                .into_iter()
                .map(|r| {
                    Ok(DeviationRecord {
                        corruption: parse_label(&r.corruption, r.seed)?,
                        id: r.id,
                        dataset: r.dataset,
                        base_pred: r.base_pred,
                        corrupted_pred: r.corrupted_pred,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            emit(&robustness_profile(&records)?, out.as_deref())
        }
        MetricsCommand::Mae { predictions } => {
            #[derive(Deserialize)]
            struct Row {
                pred: i64,
                label: i64,
            }
            let rows: Vec<Row> = read_csv(&predictions)?;
            let pairs: Vec<(i64, i64)> = rows.iter().map(|r| (r.pred, r.label)).collect();
            emit(&mae(&pairs)?, None)
        }
        MetricsCommand::Density {
            errors,
            bandwidth,
            curve,
        } => {
            #[derive(Deserialize)]
            struct Row {
                error: f64,
            }
            let rows: Vec<Row> = read_csv(&errors)?;
            let values: Vec<f64> = rows.iter().map(|r| r.error).collect();
            let density = error_density(&values, bandwidth)?;
            if let Some(path) = curve {
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["error", "density"])?;
                for (x, d) in density.grid.iter().zip(&density.density) {
                    w.write_record([x.to_string(), d.to_string()])?;
                }
                w.flush()?;
            }
            let mut summary = BTreeMap::new();
            summary.insert("bandwidth", serde_json::json!(density.bandwidth));
            summary.insert("bimodality_score", serde_json::json!(bimodality_score(&density)));
            summary.insert("integral", serde_json::json!(density.trapezoid_integral()));
            summary.insert("n", serde_json::json!(values.len()));
            emit(&summary, None)
        }
    }
}
