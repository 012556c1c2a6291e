use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::container::{read_container, read_metadata, write_rows, AnchorProvenance, ContainerMetadata};
use super::vector::TaskVector;
use super::TaskVectorError;
use crate::gateway::protocol::SteeringPayload;

pub const DEFAULT_ALPHA: f64 = 3.0;

/// Direction `t_nk - t_k` and the scale the sidecar applies to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringVector {
    pub direction: Vec<f64>,
    pub alpha: f64,
    pub model_id: String,
    pub layer_count_used: usize,
    pub per_layer_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<AnchorProvenance>,
}

pub fn steering_vector(
    t_k: &TaskVector,
    t_nk: &TaskVector,
    alpha: f64,
) -> Result<SteeringVector, TaskVectorError> {
    t_k.check_compatible(t_nk)?;
    if !alpha.is_finite() {
        return Err(TaskVectorError::NonFiniteAlpha(alpha));
    }
    Ok(SteeringVector {
        direction: t_nk.values.iter().zip(&t_k.values).map(|(n, k)| n - k).collect(),
        alpha,
        model_id: t_k.model_id.clone(),
        layer_count_used: t_k.layer_count_used,
        per_layer_dim: t_k.per_layer_dim,
        provenance: None,
    })
}

impl SteeringVector {
    pub fn with_alpha(&self, alpha: f64) -> Result<Self, TaskVectorError> {
        if !alpha.is_finite() {
            return Err(TaskVectorError::NonFiniteAlpha(alpha));
        }
        Ok(Self {
            alpha,
            ..self.clone()
        })
    }

    pub fn with_provenance(mut self, provenance: AnchorProvenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    /// `alpha * direction`, the delta added to the hidden states.
    pub fn applied(&self) -> Vec<f64> {
        self.direction.iter().map(|d| self.alpha * d).collect()
    }

    pub fn payload(&self) -> SteeringPayload {
        SteeringPayload {
            vector: self.direction.clone(),
            alpha: self.alpha,
        }
    }

    /// SHA-256 over model id, alpha and direction bits; keys cached steered
    /// requests.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.model_id.as_bytes());
        hasher.update([0]);
        hasher.update(self.alpha.to_le_bytes());
        for d in &self.direction {
            hasher.update(d.to_le_bytes());
        }
        hex(&hasher.finalize())
    }

    /// Writes the direction as a one-row container plus its metadata.
    pub fn save(&self, path: &Path) -> Result<(), TaskVectorError> {
        let meta = ContainerMetadata {
            model_id: self.model_id.clone(),
            source_ids: vec!["steering".into()],
            anchor_provenance: self.provenance.clone(),
            alpha: Some(self.alpha),
        };
        write_rows(
            path,
            &self.model_id,
            self.layer_count_used,
            self.per_layer_dim,
            std::slice::from_ref(&self.direction),
            &meta,
        )
    }

    pub fn load(path: &Path) -> Result<Self, TaskVectorError> {
        let rows = read_container(path)?;
        let meta = read_metadata(path)?;
        let [row] = <[TaskVector; 1]>::try_from(rows)
            .map_err(|v| TaskVectorError::Format(format!("expected 1 vector, found {}", v.len())))?;
        Ok(Self {
            direction: row.values,
            alpha: meta.alpha.unwrap_or(DEFAULT_ALPHA),
            model_id: row.model_id,
            layer_count_used: row.layer_count_used,
            per_layer_dim: row.per_layer_dim,
            provenance: meta.anchor_provenance,
        })
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(values: &[f64]) -> TaskVector {
        TaskVector::new("m", 1, values.len(), values.to_vec(), "x").unwrap()
    }

    #[test]
    fn examples() {
        let s = steering_vector(&tv(&[1.0, 0.0]), &tv(&[0.0, 1.0]), 3.0).unwrap();
        assert_eq!(s.applied(), [-3.0, 3.0]);
        let same = steering_vector(&tv(&[2.0, 5.0]), &tv(&[2.0, 5.0]), 3.0).unwrap();
        assert!(same.direction.iter().all(|&d| d == 0.0));
        assert!(steering_vector(&tv(&[1.0]), &tv(&[1.0]), f64::NAN).is_err());
        assert!(steering_vector(&tv(&[1.0]), &tv(&[1.0, 2.0]), 1.0).is_err());
    }

    #[test]
    fn fingerprint_tracks_alpha_and_direction() {
        let s = steering_vector(&tv(&[1.0, 0.0]), &tv(&[0.0, 1.0]), 3.0).unwrap();
        assert_eq!(s.fingerprint(), s.clone().fingerprint());
        assert_ne!(s.fingerprint(), s.with_alpha(2.0).unwrap().fingerprint());
        let mut other = s.clone();
        other.direction[0] = -0.5;
        assert_ne!(s.fingerprint(), other.fingerprint());
        assert_eq!(s.fingerprint().len(), 64);
    }
}
