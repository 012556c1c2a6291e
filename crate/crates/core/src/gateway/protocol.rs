//! Request and response bodies of the estimator wire protocol.
//!
//! | Route                | Body                                            | Response                        |
//! |----------------------|-------------------------------------------------|---------------------------------|
//! | `POST /v1/estimate`  | [`EstimateRequest`]                             | [`TextResponse`]                |
//! | `POST /v1/identify`  | [`PromptRequest`]                               | [`TextResponse`]                |
//! | `POST /v1/activations` | [`PromptRequest`]                             | [`ActivationsResponse`]         |
//! | `GET /v1/model_info` |                                                 | [`ModelInfo`]                   |
//!
//! Images travel as base64 PNG. Floats use full round-trip precision.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::image::{Image, ImageError};

pub const ESTIMATE_PATH: &str = "/v1/estimate";
pub const IDENTIFY_PATH: &str = "/v1/identify";
pub const ACTIVATIONS_PATH: &str = "/v1/activations";
pub const MODEL_INFO_PATH: &str = "/v1/model_info";

pub const AGE_PROMPT: &str = "Estimate the age of the person in this photograph. Respond with ONLY a single integer representing their age in years. Do not include any other text, explanation, or units";
pub const IDENTIFY_PROMPT: &str =
    "Do you know this person? If yes, provide their name only. If not, say 'Unknown'";

/// Cross-check prompt with `name` substituted.
pub fn verify_prompt(name: &str) -> String {
    format!("Is this person '{name}'? Answer with yes or no only.")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringPayload {
    pub vector: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRequest {
    pub image_b64: String,
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steering: Option<SteeringPayload>,
}

/// Body of `/v1/identify` and `/v1/activations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub image_b64: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationsResponse {
    /// One vector per decoder layer `1..=floor(L/2)`.
    pub layers: Vec<Vec<f64>>,
    pub token_position: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub num_layers: u32,
    pub hidden_dim: u32,
    pub supports_steering: bool,
}

impl ModelInfo {
    /// Number of layers a task vector covers: `floor(num_layers / 2)`.
    pub fn layers_used(&self) -> usize {
        self.num_layers as usize / 2
    }

    pub fn task_vector_dim(&self) -> usize {
        self.layers_used() * self.hidden_dim as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub fn encode_image(image: &Image) -> Result<String, ImageError> {
    Ok(STANDARD.encode(image.to_png_bytes()?))
}

pub fn decode_image(b64: &str) -> Result<Image, String> {
    let bytes = STANDARD
        .decode(b64)
        .map_err(|e| format!("invalid base64 image: {e}"))?;
    Image::decode(&bytes).map_err(|e| format!("invalid image: {e}"))
}
