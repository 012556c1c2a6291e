//! Uniform access to age estimators.
//!
//! An [`EstimatorClient`] speaks the JSON wire protocol in [`protocol`] to a
//! remote sidecar, or calls a [`SidecarBehavior`] in-process. Requests are
//! retried with exponential backoff on transport errors, rate limiting and
//! server errors only; a response that fails to parse is a value
//! ([`ParsedAge::ParseFailure`]), never a retry.

mod client;
mod identity;
mod mock;
mod parse;
pub mod protocol;
mod server;

use thiserror::Error;

pub use client::{AgeEstimate, Endpoint, EstimatorClient, EstimatorHandle, MAX_RAW_RESPONSE};
pub use identity::{
    levenshtein, match_identity, normalize_name, parse_verification, IdentityAnswer,
    MATCH_DISTANCE,
};
pub use mock::{mock_estimate, MockModel, SidecarBehavior, SidecarError};
pub use parse::{parse_age_response, ParsedAge, MAX_AGE};
pub use protocol::ModelInfo;
pub use server::MockServer;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("steering unsupported: {0}")]
    SteeringUnsupported(String),
    #[error("could not encode image: {0}")]
    ImageEncode(String),
    #[error("request rejected with status {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("invalid estimator handle: {0}")]
    InvalidHandle(String),
}
