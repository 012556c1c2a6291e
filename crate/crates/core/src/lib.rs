//! Evaluation harness for the identity shortcut in zero-shot age estimators.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corruption`]: the 19 severity-parameterized common corruptions.
//! - [`gateway`]: estimator clients, the wire protocol, response parsing and a
//!   deterministic mock model.
//! - [`dataset`]: labeled manifests, demographic subsampling and the
//!   known/unknown identity split.
//! - [`metrics`]: shortcut impact, robustness profiles, MAE and error densities.
//! - [`taskvector`]: task-vector geometry, shortcut membership and steering.
//! - [`orchestrator`]: experiment configs, the request cache and report emission.

pub mod corruption;
pub mod dataset;
pub mod gateway;
pub mod image;
pub mod metrics;
pub mod orchestrator;
pub mod rng;
pub mod taskvector;

pub use crate::image::{Image, ImageError};
