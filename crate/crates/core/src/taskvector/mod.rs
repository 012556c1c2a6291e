//! Task vectors: hidden states at the last prompt token, concatenated over the
//! first half of a model's decoder layers.
//!
//! Two anchors, the mean task vectors over images whose identity the model
//! knows (`t_k`) and does not know (`t_nk`), define the scalar projection
//! `delta_k(t) = |t - t_nk| - |t - t_k|`. Membership in the shortcut regime is
//! decided by tail probabilities of that projection, and `t_nk - t_k` is the
//! steering direction.

mod container;
mod membership;
mod steering;
mod vector;

use thiserror::Error;

pub use container::{
    metadata_path, read_container, read_metadata, write_container, write_metadata,
    AnchorProvenance, ContainerMetadata, CONTAINER_MAGIC, CONTAINER_VERSION,
};
pub use membership::{
    shortcut_membership, shortcut_ratio, DensityMethod, MembershipModel, TaskVectorDistribution,
    MEMBERSHIP_THRESHOLD, MIN_DISTRIBUTION_SAMPLES,
};
pub use steering::{steering_vector, SteeringVector, DEFAULT_ALPHA};
pub(crate) use steering::hex;
pub use vector::{build_task_vector, delta_k, euclidean_distance, mean_task_vector, TaskVector};

#[derive(Debug, Error, PartialEq)]
pub enum TaskVectorError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite activation at layer {layer}, component {index}")]
    NonFiniteActivation { layer: usize, index: usize },
    #[error("no task vectors given")]
    EmptyInput,
    #[error("{side} distribution has {got} samples, at least {needed} required")]
    InsufficientSamples {
        side: &'static str,
        got: usize,
        needed: usize,
    },
    #[error("{0} distribution has zero variance along the anchor axis")]
    DegenerateDistribution(&'static str),
    #[error("alpha must be finite, got {0}")]
    NonFiniteAlpha(f64),
    #[error("container i/o: {0}")]
    Io(String),
    #[error("malformed container: {0}")]
    Format(String),
}

impl From<std::io::Error> for TaskVectorError {
    fn from(e: std::io::Error) -> Self {
        TaskVectorError::Io(e.to_string())
    }
}
