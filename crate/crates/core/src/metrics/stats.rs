//! Summation and mean/standard-error primitives.

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Neumaier-compensated sum.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// A mean with its standard error (sample standard deviation over `sqrt(n)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSem {
    pub mean: f64,
    pub sem: f64,
}

impl MeanSem {
    /// Two-pass mean and SEM. A single value has SEM 0.
    pub fn of(values: &[f64]) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let n = values.len() as f64;
        let mean = kahan_sum(values.iter().copied()) / n;
        if values.len() == 1 {
            return Ok(Self { mean, sem: 0.0 });
        }
        let ss = kahan_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        let std = (ss / (n - 1.0)).sqrt();
        Ok(Self {
            mean,
            sem: std / n.sqrt(),
        })
    }
}

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
