//! Gaussian kernel density estimates of prediction errors.

use serde::{Deserialize, Serialize};

use super::stats::{kahan_sum, quantile_sorted, MeanSem};
use super::MetricsError;

pub const DENSITY_GRID_POINTS: usize = 256;

/// Density sampled on an evenly spaced grid; integrates to 1 under the
/// trapezoid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    pub fn trapezoid_integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    kahan_sum(
        grid.windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])),
    )
}

/// Silverman's rule: `0.9 * min(std, IQR / 1.34) * n^(-1/5)`. When the IQR
/// is zero the standard deviation alone is used.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let std = MeanSem::of(values).map(|m| m.sem * n.sqrt()).unwrap_or(0.0);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    0.9 * spread * n.powf(-0.2)
}

/// KDE on a 256-point grid over `[min(0, min error), max error]`.
pub fn error_density(errors: &[f64], bandwidth: Option<f64>) -> Result<DensityCurve, MetricsError> {
    let mut distinct = errors.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(MetricsError::DegenerateInput(distinct.len()));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(MetricsError::InvalidBandwidth(h)),
        None => silverman_bandwidth(errors),
    };
    let lo = distinct[0].min(0.0);
    let hi = distinct[distinct.len() - 1];
    let step = (hi - lo) / (DENSITY_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..DENSITY_GRID_POINTS)
        .map(|i| lo + step * i as f64)
        .collect();
    let norm = 1.0 / (errors.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let raw: Vec<f64> = grid
        .iter()
        .map(|&x| {
            norm * kahan_sum(errors.iter().map(|&e| {
                let u = (x - e) / h;
                libm::exp(-0.5 * u * u)
            }))
        })
        .collect();
    // Mass beyond the grid is dropped and the curve renormalized on its support.
    let area = trapezoid(&grid, &raw);
    let density = raw.into_iter().map(|v| v / area).collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth: h,
    })
}

/// Number of local maxima higher than 5% of the global peak. A plateau counts
/// once; an endpoint counts when it is strictly above its neighbour.
pub fn bimodality_score(curve: &DensityCurve) -> usize {
    let peak = curve.density.iter().copied().fold(0.0, f64::max);
    let floor = 0.05 * peak;
    // Collapse runs of equal values so plateaus are single points.
    let mut runs: Vec<f64> = Vec::with_capacity(curve.density.len());
    for &v in &curve.density {
        if runs.last() != Some(&v) {
            runs.push(v);
        }
    }
    if runs.len() < 2 {
        return 0;
    }
    (0..runs.len())
        .filter(|&i| {
            let left_lower = i == 0 || runs[i - 1] < runs[i];
            let right_lower = i + 1 == runs.len() || runs[i + 1] < runs[i];
            left_lower && right_lower && runs[i] > floor
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair() {
        let c = error_density(&[1.0, 3.0], None).unwrap();
        assert_eq!(c.grid.len(), DENSITY_GRID_POINTS);
        // grid step is 3/255, so 2.0 is grid point 170
        let centre = 170;
        assert!((c.grid[centre] - 2.0).abs() < 1e-12);
        for k in 1..=85 {
            let (a, b) = (c.density[centre - k], c.density[centre + k]);
            assert!((a - b).abs() <= 1e-12 * a.max(b), "offset {k}: {a} vs {b}");
        }
        assert!((c.trapezoid_integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(error_density(&[2.0, 2.0], None), Err(MetricsError::DegenerateInput(1)));
        assert_eq!(error_density(&[], None), Err(MetricsError::DegenerateInput(0)));
        assert_eq!(
            error_density(&[1.0, 2.0], Some(0.0)),
            Err(MetricsError::InvalidBandwidth(0.0))
        );
    }

    #[test]
    fn score_edge_cases() {
        let flat = DensityCurve {
            grid: (0..5).map(f64::from).collect(),
            density: vec![0.0; 5],
            bandwidth: 1.0,
        };
        assert_eq!(bimodality_score(&flat), 0);
        let plateau = DensityCurve {
            density: vec![0.0, 1.0, 1.0, 0.5, 0.8],
            ..flat.clone()
        };
        assert_eq!(bimodality_score(&plateau), 2);
        let tiny_bump = DensityCurve {
            density: vec![0.0, 1.0, 0.5, 0.01, 0.02],
            ..flat
        };
        assert_eq!(bimodality_score(&tiny_bump), 1);
    }
}
