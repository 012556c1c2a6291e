//! Plot-ready CSV series derived from run reports.
//!
//! Written under `<output_dir>/plots/`, indexed by `manifest.json`:
//!
//! | file | columns |
//! |------|---------|
//! | `robustness_<estimator>.csv` | `dataset,kind,severity,mean_normalized_deviation` |
//! | `density_<estimator>_<dataset>_<series>.csv` | `error,density` (256 rows) |
//! | `delta_k_<estimator>_<dataset>.csv` | `delta_k,density` (256 rows) |
//!
//! Error series are `known`/`unknown` for the shortcut experiment and
//! `default`/`steered` for steering.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::reports::{slug, write_csv, write_json, RunOutputs};
use super::OrchestratorError;
use crate::metrics::{error_density, DensityCurve};

pub const PLOT_DIR: &str = "plots";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotFile {
    pub file: String,
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotBundle {
    pub files: Vec<PlotFile>,
}

struct Emitter<'a> {
    dir: &'a Path,
    bundle: PlotBundle,
}

impl Emitter<'_> {
    fn table(&mut self, file: String, kind: &str, columns: &[&str], rows: Vec<Vec<String>>) -> Result<(), OrchestratorError> {
        let n = rows.len();
        write_csv(&self.dir.join(&file), columns, rows)?;
        self.bundle.files.push(PlotFile {
            file,
            kind: kind.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: n,
        });
        Ok(())
    }

    /// Writes a density curve, or logs why there is none.
    fn density(&mut self, file: String, kind: &str, column: &str, values: &[f64]) -> Result<(), OrchestratorError> {
        match error_density(values, None) {
            Ok(DensityCurve { grid, density, .. }) => {
                let rows = grid
                    .iter()
                    .zip(&density)
                    .map(|(x, d)| vec![x.to_string(), d.to_string()])
                    .collect();
                self.table(file, kind, &[column, "density"], rows)
            }
            Err(e) => {
                log::info!("skipping {file}: {e}");
                Ok(())
            }
        }
    }
}

/// Writes every series derivable from `outputs`. An empty run yields a
/// bundle holding only the index file.
pub fn emit_plot_data(outputs: &RunOutputs, output_dir: &Path) -> Result<PlotBundle, OrchestratorError> {
    let dir = output_dir.join(PLOT_DIR);
    fs::create_dir_all(&dir).map_err(|e| OrchestratorError::Io(format!("{}: {e}", dir.display())))?;
    let mut em = Emitter {
        dir: &dir,
        bundle: PlotBundle::default(),
    };

    for r in &outputs.robustness {
        let mut rows = Vec::new();
        for (dataset, d) in &r.report.per_dataset {
            for (label, value) in &d.per_corruption {
                let (kind, severity) = label.split_once('@').unwrap_or((label.as_str(), ""));
                rows.push(vec![dataset.clone(), kind.into(), severity.into(), value.to_string()]);
            }
        }
        em.table(
            format!("robustness_{}.csv", slug(&r.estimator)),
            "robustness_vs_severity",
            &["dataset", "kind", "severity", "mean_normalized_deviation"],
            rows,
        )?;
    }

    for s in &outputs.shortcut {
        for (flag, series) in [(true, "known"), (false, "unknown")] {
            let errors: Vec<f64> = s
                .records
                .iter()
                .filter(|r| r.known == flag)
                .filter_map(|r| r.subject_error())
                .collect();
            em.density(
                format!("density_{}_{}_{series}.csv", slug(&s.subject), slug(&s.dataset)),
                "error_density",
                "error",
                &errors,
            )?;
        }
    }

    for s in &outputs.steering {
        let errors: Vec<(i64, i64)> = s.samples.iter().filter_map(|x| x.errors()).collect();
        for (series, pick) in [("default", 0), ("steered", 1)] {
            let values: Vec<f64> = errors
                .iter()
                .map(|&(d, st)| if pick == 0 { d as f64 } else { st as f64 })
                .collect();
            em.density(
                format!("density_{}_{}_{series}.csv", slug(&s.estimator), slug(&s.dataset)),
                "error_density",
                "error",
                &values,
            )?;
        }
        let deltas: Vec<f64> = s.samples.iter().filter_map(|x| x.delta_k).collect();
        em.density(
            format!("delta_k_{}_{}.csv", slug(&s.estimator), slug(&s.dataset)),
            "delta_k_density",
            "delta_k",
            &deltas,
        )?;
    }

    write_json(&dir.join("manifest.json"), &em.bundle)?;
    Ok(em.bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_outputs_give_index_only() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = emit_plot_data(&RunOutputs::default(), dir.path()).unwrap();
        assert!(bundle.files.is_empty());
        let names: Vec<_> = fs::read_dir(dir.path().join(PLOT_DIR))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, ["manifest.json"]);
    }
}
