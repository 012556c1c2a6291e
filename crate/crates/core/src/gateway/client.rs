//! Estimator handles and the retrying protocol client.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::identity::{parse_verification, IdentityAnswer};
use super::mock::{MockModel, SidecarBehavior, SidecarError};
use super::parse::{parse_age_response, ParsedAge};
use super::protocol::{
    encode_image, verify_prompt, ActivationsResponse, EstimateRequest, ModelInfo, PromptRequest,
    TextResponse, ACTIVATIONS_PATH, AGE_PROMPT, ESTIMATE_PATH, IDENTIFY_PATH, IDENTIFY_PROMPT,
    MODEL_INFO_PATH,
};
use super::GatewayError;
use crate::image::Image;
use crate::taskvector::SteeringVector;

/// Longest raw response kept on an [`AgeEstimate`], in characters.
pub const MAX_RAW_RESPONSE: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Endpoint {
    /// The in-process [`MockModel`].
    Mock,
    /// Base URL of a protocol server, without a trailing slash.
    Http(String),
}

impl FromStr for Endpoint {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("mock") {
            Ok(Endpoint::Mock)
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(Endpoint::Http(s.trim_end_matches('/').to_string()))
        } else {
            Err(GatewayError::InvalidHandle(format!(
                "endpoint `{s}` is neither `mock` nor an http(s) URL"
            )))
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Mock => f.write_str("mock"),
            Endpoint::Http(url) => f.write_str(url),
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

fn default_prompt() -> String {
    AGE_PROMPT.to_string()
}
fn default_max_tokens() -> u32 {
    10
}
fn default_timeout_ms() -> u64 {
    60_000
}
fn default_retry_budget() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    100
}

/// How to reach one estimator and how to prompt it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorHandle {
    pub endpoint: Endpoint,
    pub model_id: String,
    #[serde(default = "default_prompt")]
    pub prompt: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Retries after the first attempt; the default allows three attempts.
    #[serde(default = "default_retry_budget")]
    pub retry_budget: u32,
    /// Delay before the first retry; doubles on each further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl EstimatorHandle {
    pub fn new(endpoint: Endpoint, model_id: impl Into<String>) -> Self {
        Self {
            endpoint,
            model_id: model_id.into(),
            prompt: default_prompt(),
            max_tokens: default_max_tokens(),
            temperature: 0.0,
            timeout_ms: default_timeout_ms(),
            retry_budget: default_retry_budget(),
            backoff_ms: default_backoff_ms(),
        }
    }

    pub fn mock() -> Self {
        Self::new(Endpoint::Mock, "mock")
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(GatewayError::InvalidHandle(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidHandle("max_tokens must be >= 1".into()));
        }
        if self.prompt.trim().is_empty() {
            return Err(GatewayError::InvalidHandle("prompt must be non-empty".into()));
        }
        if self.model_id.trim().is_empty() {
            return Err(GatewayError::InvalidHandle("model_id must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeEstimate {
    pub age: ParsedAge,
    /// Response text, truncated to [`MAX_RAW_RESPONSE`] characters.
    pub raw_response: String,
    pub latency_ms: u64,
    pub steered: bool,
}

enum Transport {
    InProcess(Arc<dyn SidecarBehavior>),
    Http(ureq::Agent),
}

/// Outcome of one attempt: retryable failures are transport problems,
/// rate limiting and server errors.
enum Failure {
    Retryable(String),
    Fatal(GatewayError),
}

fn classify(status: u16, message: String) -> Failure {
    match status {
        409 => Failure::Fatal(GatewayError::SteeringUnsupported(message)),
        429 | 500..=599 => Failure::Retryable(format!("status {status}: {message}")),
        _ => Failure::Fatal(GatewayError::Rejected { status, message }),
    }
}

pub struct EstimatorClient {
    handle: EstimatorHandle,
    transport: Transport,
    info: OnceLock<ModelInfo>,
}

impl fmt::Debug for EstimatorClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EstimatorClient")
            .field("handle", &self.handle)
            .finish_non_exhaustive()
    }
}

impl EstimatorClient {
    /// Builds a client for the handle's endpoint; `mock` runs [`MockModel`]
    /// in-process.
    pub fn connect(handle: EstimatorHandle) -> Result<Self, GatewayError> {
        handle.validate()?;
        let transport = match &handle.endpoint {
            Endpoint::Mock => Transport::InProcess(Arc::new(MockModel::default())),
            Endpoint::Http(_) => Transport::Http(
                ureq::AgentBuilder::new()
                    .timeout(Duration::from_millis(handle.timeout_ms))
                    .build(),
            ),
        };
        Ok(Self {
            handle,
            transport,
            info: OnceLock::new(),
        })
    }

    /// Calls `behavior` directly instead of going through the network.
    pub fn in_process(
        handle: EstimatorHandle,
        behavior: Arc<dyn SidecarBehavior>,
    ) -> Result<Self, GatewayError> {
        handle.validate()?;
        Ok(Self {
            handle,
            transport: Transport::InProcess(behavior),
            info: OnceLock::new(),
        })
    }

    pub fn handle(&self) -> &EstimatorHandle {
        &self.handle
    }

    /// Model descriptor, fetched once and cached.
    pub fn model_info(&self) -> Result<ModelInfo, GatewayError> {
        if let Some(info) = self.info.get() {
            return Ok(info.clone());
        }
        let info: ModelInfo = self.with_retries(|| self.get(MODEL_INFO_PATH))?;
        Ok(self.info.get_or_init(|| info).clone())
    }

    pub fn estimate_age(
        &self,
        image: &Image,
        steering: Option<&SteeringVector>,
    ) -> Result<AgeEstimate, GatewayError> {
        if steering.is_some() && !self.model_info()?.supports_steering {
            return Err(GatewayError::SteeringUnsupported(format!(
                "{} does not advertise steering support",
                self.handle.model_id
            )));
        }
        let request = EstimateRequest {
            image_b64: encode(image)?,
            prompt: self.handle.prompt.clone(),
            max_tokens: self.handle.max_tokens,
            temperature: self.handle.temperature,
            steering: steering.map(SteeringVector::payload),
        };
        let started = Instant::now();
        let response: TextResponse = self.with_retries(|| self.post(ESTIMATE_PATH, &request))?;
        Ok(AgeEstimate {
            age: parse_age_response(&response.text),
            raw_response: response.text.chars().take(MAX_RAW_RESPONSE).collect(),
            latency_ms: started.elapsed().as_millis() as u64,
            steered: steering.is_some(),
        })
    }

    /// Sends the identification prompt; an exact "Unknown" is the Unknown marker.
    pub fn identify(&self, image: &Image) -> Result<IdentityAnswer, GatewayError> {
        let text = self.ask(image, IDENTIFY_PROMPT.to_string())?;
        Ok(IdentityAnswer::from_response(&text))
    }

    /// Asks in a fresh single-turn request whether the person is `name`.
    pub fn verify_identity(&self, image: &Image, name: &str) -> Result<bool, GatewayError> {
        if name.trim().is_empty() {
            return Err(GatewayError::InvalidHandle("name to verify is empty".into()));
        }
        Ok(parse_verification(&self.ask(image, verify_prompt(name))?))
    }

    pub fn activations(&self, image: &Image) -> Result<ActivationsResponse, GatewayError> {
        let request = PromptRequest {
            image_b64: encode(image)?,
            prompt: self.handle.prompt.clone(),
        };
        self.with_retries(|| self.post(ACTIVATIONS_PATH, &request))
    }

    fn ask(&self, image: &Image, prompt: String) -> Result<String, GatewayError> {
        let request = PromptRequest {
            image_b64: encode(image)?,
            prompt,
        };
        let response: TextResponse = self.with_retries(|| self.post(IDENTIFY_PATH, &request))?;
        Ok(response.text)
    }

    fn with_retries<T>(&self, attempt: impl Fn() -> Result<T, Failure>) -> Result<T, GatewayError> {
        let attempts = self.handle.retry_budget + 1;
        let mut last = String::new();
        for i in 0..attempts {
            if i > 0 {
                let delay = self.handle.backoff_ms.saturating_mul(1 << (i - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match attempt() {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(msg)) => {
                    log::debug!("attempt {} of {attempts} failed: {msg}", i + 1);
                    last = msg;
                }
            }
        }
        Err(GatewayError::Transport {
            attempts,
            message: last,
        })
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, Failure> {
        match &self.transport {
            Transport::InProcess(b) => match path {
                MODEL_INFO_PATH => round_trip(&b.model_info()),
                _ => Err(Failure::Fatal(GatewayError::Rejected {
                    status: 404,
                    message: format!("no route for {path}"),
                })),
            },
            Transport::Http(agent) => {
                let url = self.url(path);
                read_http(agent.get(&url).call())
            }
        }
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, Failure> {
        match &self.transport {
            Transport::InProcess(b) => {
                // Serialize through JSON so in-process calls see exactly what a
                // server would.
                let value = serde_json::to_value(body)
                    .map_err(|e| Failure::Fatal(GatewayError::Protocol(e.to_string())))?;
                let result = match path {
                    ESTIMATE_PATH => from_value(value).and_then(|r| b.estimate(&r)).and_then(|r| to_value(&r)),
                    IDENTIFY_PATH => from_value(value).and_then(|r| b.identify(&r)).and_then(|r| to_value(&r)),
                    ACTIVATIONS_PATH => {
                        from_value(value).and_then(|r| b.activations(&r)).and_then(|r| to_value(&r))
                    }
                    _ => Err(SidecarError::new(404, format!("no route for {path}"))),
                };
                match result {
                    Ok(v) => serde_json::from_value(v)
                        .map_err(|e| Failure::Fatal(GatewayError::Protocol(e.to_string()))),
                    Err(e) => Err(classify(e.status, e.message)),
                }
            }
            Transport::Http(agent) => {
                let url = self.url(path);
                let body = serde_json::to_string(body)
                    .map_err(|e| Failure::Fatal(GatewayError::Protocol(e.to_string())))?;
                read_http(
                    agent
                        .post(&url)
                        .set("Content-Type", "application/json")
                        .send_string(&body),
                )
            }
        }
    }

    fn url(&self, path: &str) -> String {
        match &self.handle.endpoint {
            Endpoint::Http(base) => format!("{base}{path}"),
            Endpoint::Mock => path.to_string(),
        }
    }
}

fn encode(image: &Image) -> Result<String, GatewayError> {
    encode_image(image).map_err(|e| GatewayError::ImageEncode(e.to_string()))
}

fn from_value<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, SidecarError> {
    serde_json::from_value(value).map_err(|e| SidecarError::bad_request(e.to_string()))
}

fn to_value<T: Serialize>(value: &T) -> Result<serde_json::Value, SidecarError> {
    serde_json::to_value(value).map_err(|e| SidecarError::new(500, e.to_string()))
}

fn round_trip<S: Serialize, T: DeserializeOwned>(value: &S) -> Result<T, Failure> {
    serde_json::to_value(value)
        .and_then(serde_json::from_value)
        .map_err(|e| Failure::Fatal(GatewayError::Protocol(e.to_string())))
}

fn read_http<T: DeserializeOwned>(result: Result<ureq::Response, ureq::Error>) -> Result<T, Failure> {
    match result {
        Ok(response) => {
            let text = response
                .into_string()
                .map_err(|e| Failure::Retryable(format!("reading response: {e}")))?;
            serde_json::from_str(&text).map_err(|e| {
                Failure::Fatal(GatewayError::Protocol(format!("malformed response: {e}")))
            })
        }
        Err(ureq::Error::Status(status, response)) => {
            let body = response.into_string().unwrap_or_default();
            let message = serde_json::from_str::<super::protocol::ErrorBody>(&body)
                .map(|b| b.error)
                .unwrap_or(body);
            Err(classify(status, message))
        }
        Err(ureq::Error::Transport(t)) => Err(Failure::Retryable(t.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_parsing() {
        assert_eq!("mock".parse::<Endpoint>().unwrap(), Endpoint::Mock);
        assert_eq!(
            "http://127.0.0.1:8080/".parse::<Endpoint>().unwrap(),
            Endpoint::Http("http://127.0.0.1:8080".into())
        );
        assert!("ftp://x".parse::<Endpoint>().is_err());
    }

    #[test]
    fn handle_validation() {
        let mut h = EstimatorHandle::mock();
        assert!(h.validate().is_ok());
        h.temperature = -1.0;
        assert!(h.validate().is_err());
        let mut h = EstimatorHandle::mock();
        h.max_tokens = 0;
        assert!(h.validate().is_err());
        let mut h = EstimatorHandle::mock();
        h.prompt = "  ".into();
        assert!(h.validate().is_err());
    }

    #[test]
    fn mock_client_examples() {
        let client = EstimatorClient::connect(EstimatorHandle::mock()).unwrap();
        let gray = Image::filled(16, 16, 0.5).unwrap();
        let est = client.estimate_age(&gray, None).unwrap();
        // 0.5 travels as 128/255 in the PNG: 1 + floor(49.69) = 50
        assert_eq!(est.age, ParsedAge::Years(50));
        assert!(!est.steered);
        assert!(client.identify(&gray).unwrap().is_unknown());
        assert!(!client.verify_identity(&gray, "Will Smith").unwrap());
        let acts = client.activations(&gray).unwrap();
        assert_eq!(acts.layers.len(), 2);
        assert!(acts.layers.iter().all(|l| l.len() == 8));
    }
}
