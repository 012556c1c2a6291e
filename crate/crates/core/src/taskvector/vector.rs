use serde::{Deserialize, Serialize};

use super::TaskVectorError;
use crate::gateway::protocol::{ActivationsResponse, ModelInfo};
use crate::metrics::stats::kahan_sum;

/// Layer-major concatenation of `layer_count_used` hidden states of
/// `per_layer_dim` components each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVector {
    pub model_id: String,
    pub layer_count_used: usize,
    pub per_layer_dim: usize,
    pub values: Vec<f64>,
    pub source_id: String,
}

impl TaskVector {
    /// Checks the length and finiteness invariants.
    pub fn new(
        model_id: impl Into<String>,
        layer_count_used: usize,
        per_layer_dim: usize,
        values: Vec<f64>,
        source_id: impl Into<String>,
    ) -> Result<Self, TaskVectorError> {
        if values.len() != layer_count_used * per_layer_dim {
            return Err(TaskVectorError::DimensionMismatch(format!(
                "{} values for {layer_count_used} layers of {per_layer_dim}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TaskVectorError::NonFiniteActivation {
                layer: i / per_layer_dim.max(1) + 1,
                index: i % per_layer_dim.max(1),
            });
        }
        Ok(Self {
            model_id: model_id.into(),
            layer_count_used,
            per_layer_dim,
            values,
            source_id: source_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Slice of layer `layer` (1-based).
    pub fn layer(&self, layer: usize) -> &[f64] {
        &self.values[(layer - 1) * self.per_layer_dim..layer * self.per_layer_dim]
    }

    pub(crate) fn check_compatible(&self, other: &TaskVector) -> Result<(), TaskVectorError> {
        if self.layer_count_used != other.layer_count_used
            || self.per_layer_dim != other.per_layer_dim
            || self.model_id != other.model_id
        {
            return Err(TaskVectorError::DimensionMismatch(format!(
                "{}: {}x{} vs {}: {}x{}",
                self.model_id,
                self.layer_count_used,
                self.per_layer_dim,
                other.model_id,
                other.layer_count_used,
                other.per_layer_dim
            )));
        }
        Ok(())
    }
}

/// Concatenates an activation dump, which must hold exactly `floor(L/2)`
/// layers of `hidden_dim` values. No normalization is applied.
pub fn build_task_vector(
    dump: &ActivationsResponse,
    info: &ModelInfo,
    source_id: impl Into<String>,
) -> Result<TaskVector, TaskVectorError> {
    let layers = info.layers_used();
    let dim = info.hidden_dim as usize;
    if dump.layers.len() != layers {
        return Err(TaskVectorError::DimensionMismatch(format!(
            "dump has {} layers, model with {} layers needs {layers}",
            dump.layers.len(),
            info.num_layers
        )));
    }
    let mut values = Vec::with_capacity(layers * dim);
    for (l, layer) in dump.layers.iter().enumerate() {
        if layer.len() != dim {
            return Err(TaskVectorError::DimensionMismatch(format!(
                "layer {} has {} values, hidden_dim is {dim}",
                l + 1,
                layer.len()
            )));
        }
        if let Some(index) = layer.iter().position(|v| !v.is_finite()) {
            return Err(TaskVectorError::NonFiniteActivation { layer: l + 1, index });
        }
        values.extend_from_slice(layer);
    }
    TaskVector::new(info.model_id.clone(), layers, dim, values, source_id)
}

/// Element-wise mean; the result's `source_id` is `mean(n)`.
pub fn mean_task_vector(vectors: &[TaskVector]) -> Result<TaskVector, TaskVectorError> {
    let first = vectors.first().ok_or(TaskVectorError::EmptyInput)?;
    for v in &vectors[1..] {
        first.check_compatible(v)?;
    }
    let n = vectors.len() as f64;
    let values = (0..first.dim())
        .map(|i| kahan_sum(vectors.iter().map(|v| v.values[i])) / n)
        .collect();
    TaskVector::new(
        first.model_id.clone(),
        first.layer_count_used,
        first.per_layer_dim,
        values,
        format!("mean({})", vectors.len()),
    )
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    kahan_sum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y))).sqrt()
}

/// `|t - t_nk| - |t - t_k|`: positive when `t` is closer to the known anchor.
pub fn delta_k(t: &TaskVector, t_k: &TaskVector, t_nk: &TaskVector) -> Result<f64, TaskVectorError> {
    t.check_compatible(t_k)?;
    t.check_compatible(t_nk)?;
    Ok(delta_k_raw(&t.values, &t_k.values, &t_nk.values))
}

pub(crate) fn delta_k_raw(t: &[f64], t_k: &[f64], t_nk: &[f64]) -> f64 {
    euclidean_distance(t, t_nk) - euclidean_distance(t, t_k)
}
