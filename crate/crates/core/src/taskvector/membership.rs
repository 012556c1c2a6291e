//! Shortcut membership from tail probabilities along the anchor axis.

use serde::{Deserialize, Serialize};

use super::vector::{delta_k_raw, mean_task_vector, TaskVector};
use super::TaskVectorError;
use crate::metrics::stats::MeanSem;

/// Smallest distribution size accepted by the membership test.
pub const MIN_DISTRIBUTION_SAMPLES: usize = 10;

/// Tail-probability threshold of the membership predicate.
pub const MEMBERSHIP_THRESHOLD: f64 = 0.1;

/// Samples of one task-vector population with their cached centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskVectorDistribution {
    samples: Vec<TaskVector>,
    centroid: TaskVector,
}

impl TaskVectorDistribution {
    pub fn new(samples: Vec<TaskVector>) -> Result<Self, TaskVectorError> {
        let centroid = mean_task_vector(&samples)?;
        Ok(Self { samples, centroid })
    }

    pub fn samples(&self) -> &[TaskVector] {
        &self.samples
    }

    pub fn centroid(&self) -> &TaskVector {
        &self.centroid
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// How `P(t in T)` is computed from a distribution's projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    /// Two-sided tail `2 * (1 - Phi(|z|))` of a fitted normal.
    #[default]
    Gaussian,
    /// Two-sided empirical tail: twice the smaller fraction of samples at or
    /// beyond the projection on either side, capped at 1.
    EmpiricalQuantile,
}

#[derive(Debug, Clone, PartialEq)]
struct ProjectionFit {
    mean: f64,
    std: f64,
    sorted: Vec<f64>,
}

impl ProjectionFit {
    fn new(projections: Vec<f64>, side: &'static str) -> Result<Self, TaskVectorError> {
        let stats = MeanSem::of(&projections).map_err(|_| TaskVectorError::EmptyInput)?;
        let std = stats.sem * (projections.len() as f64).sqrt();
        if !(std > 0.0) {
            return Err(TaskVectorError::DegenerateDistribution(side));
        }
        let mut sorted = projections;
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            mean: stats.mean,
            std,
            sorted,
        })
    }

    fn tail(&self, x: f64, method: DensityMethod) -> f64 {
        match method {
            DensityMethod::Gaussian => {
                let z = (x - self.mean) / self.std;
                libm::erfc(z.abs() / std::f64::consts::SQRT_2)
            }
            DensityMethod::EmpiricalQuantile => {
                let n = self.sorted.len() as f64;
                let below = self.sorted.partition_point(|&v| v <= x) as f64;
                let above = (self.sorted.len() - self.sorted.partition_point(|&v| v < x)) as f64;
                (2.0 * below.min(above) / n).min(1.0)
            }
        }
    }
}

/// Anchors plus the fitted projection models of both populations.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipModel {
    t_k: TaskVector,
    t_nk: TaskVector,
    known: ProjectionFit,
    unknown: ProjectionFit,
    method: DensityMethod,
}

impl MembershipModel {
    pub fn fit(
        dist_k: &TaskVectorDistribution,
        dist_nk: &TaskVectorDistribution,
        method: DensityMethod,
    ) -> Result<Self, TaskVectorError> {
        for (side, dist) in [("known", dist_k), ("unknown", dist_nk)] {
            if dist.len() < MIN_DISTRIBUTION_SAMPLES {
                return Err(TaskVectorError::InsufficientSamples {
                    side,
                    got: dist.len(),
                    needed: MIN_DISTRIBUTION_SAMPLES,
                });
            }
        }
        let t_k = dist_k.centroid().clone();
        let t_nk = dist_nk.centroid().clone();
        t_k.check_compatible(&t_nk)?;
        let project = |d: &TaskVectorDistribution| -> Vec<f64> {
            d.samples()
                .iter()
                .map(|s| delta_k_raw(&s.values, &t_k.values, &t_nk.values))
                .collect()
        };
        let known = ProjectionFit::new(project(dist_k), "known")?;
        let unknown = ProjectionFit::new(project(dist_nk), "unknown")?;
        Ok(Self {
            t_k,
            t_nk,
            known,
            unknown,
            method,
        })
    }

    pub fn t_k(&self) -> &TaskVector {
        &self.t_k
    }

    pub fn t_nk(&self) -> &TaskVector {
        &self.t_nk
    }

    /// The anchor-axis projection `delta_k(t)`.
    pub fn project(&self, t: &TaskVector) -> Result<f64, TaskVectorError> {
        t.check_compatible(&self.t_k)?;
        Ok(delta_k_raw(&t.values, &self.t_k.values, &self.t_nk.values))
    }

    /// `(P(t in T_k), P(t in T_nk))`.
    pub fn probabilities(&self, t: &TaskVector) -> Result<(f64, f64), TaskVectorError> {
        let x = self.project(t)?;
        Ok((self.known.tail(x, self.method), self.unknown.tail(x, self.method)))
    }

    /// `P(t in T_nk) < 0.1 and P(t in T_k) > 0.1`.
    pub fn is_member(&self, t: &TaskVector) -> Result<bool, TaskVectorError> {
        let (p_k, p_nk) = self.probabilities(t)?;
        Ok(p_nk < MEMBERSHIP_THRESHOLD && p_k > MEMBERSHIP_THRESHOLD)
    }

    /// Fraction of `vectors` classified as members.
    pub fn ratio(&self, vectors: &[TaskVector]) -> Result<f64, TaskVectorError> {
        if vectors.is_empty() {
            return Err(TaskVectorError::EmptyInput);
        }
        let mut members = 0usize;
        for v in vectors {
            members += usize::from(self.is_member(v)?);
        }
        Ok(members as f64 / vectors.len() as f64)
    }
}

pub fn shortcut_membership(
    t: &TaskVector,
    dist_k: &TaskVectorDistribution,
    dist_nk: &TaskVectorDistribution,
) -> Result<bool, TaskVectorError> {
    MembershipModel::fit(dist_k, dist_nk, DensityMethod::Gaussian)?.is_member(t)
}

pub fn shortcut_ratio(
    vectors: &[TaskVector],
    dist_k: &TaskVectorDistribution,
    dist_nk: &TaskVectorDistribution,
) -> Result<f64, TaskVectorError> {
    MembershipModel::fit(dist_k, dist_nk, DensityMethod::Gaussian)?.ratio(vectors)
}
