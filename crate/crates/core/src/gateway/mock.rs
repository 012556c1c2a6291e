//! Deterministic stand-in for a model sidecar.
//!
//! [`MockModel`] answers every route of the wire protocol from image
//! statistics alone, so harness tests run without a model:
//!
//! - estimate: `1 + floor(mean intensity * 99)`, shifted by
//!   `round(alpha * mean(steering vector))` when steering is requested;
//! - identify: `Unknown` for the identification prompt, `No` for anything else;
//! - activations: layer `l`, component `j` is `l * (channel_mean[j % 3] + j / 10)`.

use super::protocol::{
    decode_image, ActivationsResponse, EstimateRequest, ModelInfo, PromptRequest, TextResponse,
    IDENTIFY_PROMPT,
};
use crate::image::{Image, CHANNELS};
use crate::metrics::stats::kahan_sum;

/// `1 + floor(mean * 99)`: 1 for a black image, 100 for a white one.
pub fn mock_estimate(image: &Image) -> u32 {
    1 + (image.mean() * 99.0).floor() as u32
}

/// An HTTP-style failure raised by a sidecar implementation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SidecarError {
    pub status: u16,
    pub message: String,
}

impl SidecarError {
    pub fn new(status: u16, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, message)
    }
}

/// Server-side behaviour of the wire protocol. Implemented by [`MockModel`] and
/// by test doubles; served over HTTP by [`MockServer`](super::MockServer) or
/// called in-process by an [`EstimatorClient`](super::EstimatorClient).
pub trait SidecarBehavior: Send + Sync {
    fn model_info(&self) -> ModelInfo;
    fn estimate(&self, request: &EstimateRequest) -> Result<TextResponse, SidecarError>;
    fn identify(&self, request: &PromptRequest) -> Result<TextResponse, SidecarError>;
    fn activations(&self, request: &PromptRequest) -> Result<ActivationsResponse, SidecarError>;
}

#[derive(Debug, Clone)]
pub struct MockModel {
    info: ModelInfo,
}

impl Default for MockModel {
    fn default() -> Self {
        Self::new(ModelInfo {
            model_id: "mock".into(),
            num_layers: 4,
            hidden_dim: 8,
            supports_steering: true,
        })
    }
}

impl MockModel {
    pub fn new(info: ModelInfo) -> Self {
        Self { info }
    }

    /// Validates an estimate request and returns the steered age it implies.
    pub fn age_for(&self, request: &EstimateRequest) -> Result<u32, SidecarError> {
        check_prompt(&request.prompt)?;
        if request.max_tokens == 0 || !(request.temperature >= 0.0) {
            return Err(SidecarError::bad_request(
                "max_tokens must be >= 1 and temperature >= 0",
            ));
        }
        let image = decode_image(&request.image_b64).map_err(SidecarError::bad_request)?;
        let age = mock_estimate(&image);
        let Some(steering) = &request.steering else {
            return Ok(age);
        };
        if !self.info.supports_steering {
            return Err(SidecarError::new(409, "steering is not supported"));
        }
        let expected = self.info.task_vector_dim();
        if steering.vector.len() != expected {
            return Err(SidecarError::bad_request(format!(
                "steering vector has {} entries, expected {expected}",
                steering.vector.len()
            )));
        }
        if !steering.alpha.is_finite() || steering.vector.iter().any(|v| !v.is_finite()) {
            return Err(SidecarError::bad_request("steering values must be finite"));
        }
        let mean = kahan_sum(steering.vector.iter().copied()) / expected.max(1) as f64;
        let shifted = (f64::from(age) + (steering.alpha * mean).round()).clamp(0.0, 120.0);
        Ok(shifted as u32)
    }
}

fn check_prompt(prompt: &str) -> Result<(), SidecarError> {
    if prompt.trim().is_empty() {
        Err(SidecarError::bad_request("prompt must be non-empty"))
    } else {
        Ok(())
    }
}

impl SidecarBehavior for MockModel {
    fn model_info(&self) -> ModelInfo {
        self.info.clone()
    }

    fn estimate(&self, request: &EstimateRequest) -> Result<TextResponse, SidecarError> {
        Ok(TextResponse {
            text: self.age_for(request)?.to_string(),
        })
    }

    fn identify(&self, request: &PromptRequest) -> Result<TextResponse, SidecarError> {
        check_prompt(&request.prompt)?;
        decode_image(&request.image_b64).map_err(SidecarError::bad_request)?;
        let text = if request.prompt == IDENTIFY_PROMPT {
            "Unknown"
        } else {
            "No"
        };
        Ok(TextResponse { text: text.into() })
    }

    fn activations(&self, request: &PromptRequest) -> Result<ActivationsResponse, SidecarError> {
        check_prompt(&request.prompt)?;
        let image = decode_image(&request.image_b64).map_err(SidecarError::bad_request)?;
        let n = (image.width() * image.height()) as f64;
        let channel_means: Vec<f64> = (0..CHANNELS)
            .map(|c| kahan_sum(image.data().iter().skip(c).step_by(CHANNELS).copied()) / n)
            .collect();
        let layers = (1..=self.info.layers_used())
            .map(|l| {
                (0..self.info.hidden_dim as usize)
                    .map(|j| l as f64 * (channel_means[j % CHANNELS] + j as f64 / 10.0))
                    .collect()
            })
            .collect();
        // A fixed image-token budget followed by one token per prompt word.
        const IMAGE_TOKENS: u64 = 16;
        let words = request.prompt.split_whitespace().count() as u64;
        Ok(ActivationsResponse {
            layers,
            token_position: IMAGE_TOKENS + words - 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::protocol::{encode_image, SteeringPayload, AGE_PROMPT};

    #[test]
    fn mock_estimate_examples() {
        assert_eq!(mock_estimate(&Image::filled(8, 8, 0.0).unwrap()), 1);
        assert_eq!(mock_estimate(&Image::filled(8, 8, 1.0).unwrap()), 100);
        assert_eq!(mock_estimate(&Image::filled(8, 8, 0.25).unwrap()), 25);
        assert_eq!(mock_estimate(&Image::filled(8, 8, 0.5).unwrap()), 50);
    }

    fn request(steering: Option<SteeringPayload>) -> EstimateRequest {
        let image = Image::filled(8, 8, 0.25).unwrap();
        EstimateRequest {
            image_b64: encode_image(&image).unwrap(),
            prompt: AGE_PROMPT.into(),
            max_tokens: 10,
            temperature: 0.0,
            steering,
        }
    }

    #[test]
    fn steering_shift_and_validation() {
        let mock = MockModel::default();
        // 0.25 quantizes to 64/255 on the wire: 1 + floor(24.847) = 25
        assert_eq!(mock.age_for(&request(None)).unwrap(), 25);
        let steer = |vector: Vec<f64>, alpha| Some(SteeringPayload { vector, alpha });
        assert_eq!(mock.age_for(&request(steer(vec![1.0; 16], 3.0))).unwrap(), 28);
        assert_eq!(mock.age_for(&request(steer(vec![1.0; 16], 0.0))).unwrap(), 25);
        assert_eq!(mock.age_for(&request(steer(vec![0.0; 16], 3.0))).unwrap(), 25);
        assert_eq!(mock.age_for(&request(steer(vec![1.0; 3], 3.0))).unwrap_err().status, 400);
    }
}
