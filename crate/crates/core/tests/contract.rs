//! Wire-protocol contract against the mock endpoint.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::{json, Value};
use shortcut_probe_core::gateway::protocol::{
    encode_image, ActivationsResponse, EstimateRequest, ModelInfo, PromptRequest, TextResponse,
    AGE_PROMPT, IDENTIFY_PROMPT,
};
use shortcut_probe_core::gateway::{
    Endpoint, EstimatorClient, EstimatorHandle, GatewayError, MockModel, MockServer, ParsedAge,
    SidecarBehavior, SidecarError,
};
use shortcut_probe_core::taskvector::{steering_vector, TaskVector};
use shortcut_probe_core::Image;

fn image(level: f64) -> Image {
    Image::filled(12, 12, level).unwrap()
}

fn b64(level: f64) -> String {
    encode_image(&image(level)).unwrap()
}

fn start(model: MockModel) -> MockServer {
    MockServer::start(Arc::new(model), 0).unwrap()
}

fn no_steering() -> MockModel {
    MockModel::new(ModelInfo {
        model_id: "plain".into(),
        num_layers: 6,
        hidden_dim: 3,
        supports_steering: false,
    })
}

/// Sends a raw request and returns status and parsed JSON body.
fn call(server: &MockServer, method: &str, path: &str, body: Option<&str>) -> (u16, Value) {
    let request = ureq::request(method, &format!("{}{path}", server.url()));
    let result = match body {
        Some(b) => request.set("Content-Type", "application/json").send_string(b),
        None => request.call(),
    };
    let response = match result {
        Ok(r) => r,
        Err(ureq::Error::Status(_, r)) => r,
        Err(e) => panic!("transport error: {e}"),
    };
    let status = response.status();
    let text = response.into_string().unwrap();
    (status, serde_json::from_str(&text).unwrap())
}

fn handle(server: &MockServer) -> EstimatorHandle {
    let mut h = EstimatorHandle::new(Endpoint::Http(server.url()), "mock");
    h.backoff_ms = 1;
    h
}

#[test]
fn model_info_shape() {
    let server = start(MockModel::default());
    let (status, body) = call(&server, "GET", "/v1/model_info", None);
    assert_eq!(status, 200);
    assert_eq!(
        body,
        json!({"model_id": "mock", "num_layers": 4, "hidden_dim": 8, "supports_steering": true})
    );
}

#[test]
fn estimate_shape_and_value() {
    let server = start(MockModel::default());
    let request = EstimateRequest {
        image_b64: b64(0.5),
        prompt: AGE_PROMPT.into(),
        max_tokens: 10,
        temperature: 0.0,
        steering: None,
    };
    let (status, body) = call(&server, "POST", "/v1/estimate", Some(&serde_json::to_string(&request).unwrap()));
    assert_eq!(status, 200);
    let text: TextResponse = serde_json::from_value(body).unwrap();
    // 0.5 is sent as 128/255: 1 + floor(49.69)
    assert_eq!(text.text, "50");
}

#[test]
fn identify_and_verify_answers() {
    let server = start(MockModel::default());
    let ask = |prompt: &str| {
        let body = serde_json::to_string(&PromptRequest {
            image_b64: b64(0.3),
            prompt: prompt.into(),
        })
        .unwrap();
        call(&server, "POST", "/v1/identify", Some(&body))
    };
    assert_eq!(ask(IDENTIFY_PROMPT), (200, json!({"text": "Unknown"})));
    assert_eq!(ask("Is this person 'Ada'? Answer with yes or no only."), (200, json!({"text": "No"})));

    let client = EstimatorClient::connect(handle(&server)).unwrap();
    assert_eq!(client.identify(&image(0.3)).unwrap().name, None);
    assert!(!client.verify_identity(&image(0.3), "Ada").unwrap());
}

#[test]
fn activations_shape() {
    let server = start(MockModel::default());
    let body = serde_json::to_string(&PromptRequest {
        image_b64: b64(0.2),
        prompt: AGE_PROMPT.into(),
    })
    .unwrap();
    let (status, value) = call(&server, "POST", "/v1/activations", Some(&body));
    assert_eq!(status, 200);
    let acts: ActivationsResponse = serde_json::from_value(value).unwrap();
    // floor(4 / 2) layers of hidden_dim 8
    assert_eq!(acts.layers.len(), 2);
    assert!(acts.layers.iter().all(|l| l.len() == 8));
    let level = 51.0 / 255.0;
    assert!((acts.layers[1][4] - 2.0 * (level + 0.4)).abs() < 1e-12);
    assert!(acts.token_position > 0);
}

#[test]
fn unknown_route_is_404() {
    let server = start(MockModel::default());
    let (status, body) = call(&server, "GET", "/v1/nothing", None);
    assert_eq!(status, 404);
    assert!(body["error"].is_string());
}

#[test]
fn wrong_method_is_405() {
    let server = start(MockModel::default());
    assert_eq!(call(&server, "GET", "/v1/estimate", None).0, 405);
    assert_eq!(call(&server, "POST", "/v1/model_info", Some("{}")).0, 405);
}

#[test]
fn malformed_bodies_are_400() {
    let server = start(MockModel::default());
    for body in [
        "not json".to_string(),
        json!({"prompt": "x"}).to_string(),
        json!({"image_b64": "%%%", "prompt": "x", "max_tokens": 10, "temperature": 0.0}).to_string(),
        json!({"image_b64": b64(0.5), "prompt": "  ", "max_tokens": 10, "temperature": 0.0}).to_string(),
        json!({"image_b64": b64(0.5), "prompt": "x", "max_tokens": 0, "temperature": 0.0}).to_string(),
        json!({
            "image_b64": b64(0.5), "prompt": "x", "max_tokens": 10, "temperature": 0.0,
            "steering": {"vector": [1.0, 2.0], "alpha": 1.0}
        })
        .to_string(),
    ] {
        let (status, value) = call(&server, "POST", "/v1/estimate", Some(&body));
        assert_eq!(status, 400, "{body}");
        assert!(value["error"].is_string());
    }
}

#[test]
fn steering_on_unsupported_model_is_409() {
    let server = start(no_steering());
    let body = json!({
        "image_b64": b64(0.5), "prompt": "x", "max_tokens": 10, "temperature": 0.0,
        "steering": {"vector": vec![0.0; 9], "alpha": 1.0}
    });
    assert_eq!(call(&server, "POST", "/v1/estimate", Some(&body.to_string())).0, 409);

    let client = EstimatorClient::connect(handle(&server)).unwrap();
    let t = |v: f64| TaskVector::new("plain", 3, 3, vec![v; 9], "x").unwrap();
    let steering = steering_vector(&t(1.0), &t(0.0), 1.0).unwrap();
    assert!(matches!(
        client.estimate_age(&image(0.5), Some(&steering)),
        Err(GatewayError::SteeringUnsupported(_))
    ));
}

#[test]
fn responses_are_deterministic() {
    let server = start(MockModel::default());
    let client = EstimatorClient::connect(handle(&server)).unwrap();
    let img = Image::from_fn(20, 10, |x, y, c| ((x * 3 + y * 5 + c) % 17) as f64 / 16.0).unwrap();
    let first = (client.estimate_age(&img, None).unwrap().age, client.activations(&img).unwrap());
    for _ in 0..3 {
        assert_eq!(client.estimate_age(&img, None).unwrap().age, first.0);
        assert_eq!(client.activations(&img).unwrap(), first.1);
    }
}

#[test]
fn steering_shift_over_http() {
    let server = start(MockModel::default());
    let client = EstimatorClient::connect(handle(&server)).unwrap();
    let t = |v: f64| TaskVector::new("mock", 2, 8, vec![v; 16], "x").unwrap();
    // direction t_nk - t_k has mean -0.5; alpha 4 shifts by -2
    let steering = steering_vector(&t(0.75), &t(0.25), 4.0).unwrap();
    let base = client.estimate_age(&image(0.5), None).unwrap();
    let steered = client.estimate_age(&image(0.5), Some(&steering)).unwrap();
    assert_eq!(base.age, ParsedAge::Years(50));
    assert_eq!(steered.age, ParsedAge::Years(48));
    assert!(steered.steered && !base.steered);
}

/// Fails with `status` for the first `failures` estimate calls.
struct Flaky {
    inner: MockModel,
    failures: usize,
    status: u16,
    calls: AtomicUsize,
}

impl Flaky {
    fn new(failures: usize, status: u16) -> Self {
        Self {
            inner: MockModel::default(),
            failures,
            status,
            calls: AtomicUsize::new(0),
        }
    }
}

impl SidecarBehavior for Flaky {
    fn model_info(&self) -> ModelInfo {
        self.inner.model_info()
    }

    fn estimate(&self, request: &EstimateRequest) -> Result<TextResponse, SidecarError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) < self.failures {
            return Err(SidecarError::new(self.status, "flaky"));
        }
        self.inner.estimate(request)
    }

    fn identify(&self, request: &PromptRequest) -> Result<TextResponse, SidecarError> {
        self.inner.identify(request)
    }

    fn activations(&self, request: &PromptRequest) -> Result<ActivationsResponse, SidecarError> {
        self.inner.activations(request)
    }
}

#[test]
fn server_errors_are_retried_within_budget() {
    let server = MockServer::start(Arc::new(Flaky::new(2, 503)), 0).unwrap();
    let client = EstimatorClient::connect(handle(&server)).unwrap();
    assert_eq!(client.estimate_age(&image(0.5), None).unwrap().age, ParsedAge::Years(50));
    assert_eq!(server.request_count(), 3);
}

#[test]
fn retries_give_up_after_three_attempts() {
    let server = MockServer::start(Arc::new(Flaky::new(5, 500)), 0).unwrap();
    let client = EstimatorClient::connect(handle(&server)).unwrap();
    match client.estimate_age(&image(0.5), None) {
        Err(GatewayError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected transport failure, got {other:?}"),
    }
    assert_eq!(server.request_count(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(Arc::new(Flaky::new(1, 400)), 0).unwrap();
    let client = EstimatorClient::connect(handle(&server)).unwrap();
    assert!(matches!(
        client.estimate_age(&image(0.5), None),
        Err(GatewayError::Rejected { status: 400, .. })
    ));
    assert_eq!(server.request_count(), 1);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let server = start(MockModel::default());
    let url = server.url();
    drop(server);
    let mut h = EstimatorHandle::new(Endpoint::Http(url), "gone");
    h.backoff_ms = 1;
    h.retry_budget = 1;
    let client = EstimatorClient::connect(h).unwrap();
    assert!(matches!(
        client.estimate_age(&image(0.5), None),
        Err(GatewayError::Transport { attempts: 2, .. })
    ));
}

#[test]
fn in_process_matches_http() {
    let server = start(MockModel::default());
    let http = EstimatorClient::connect(handle(&server)).unwrap();
    let local = EstimatorClient::connect(EstimatorHandle::mock()).unwrap();
    for level in [0.0, 0.1, 0.37, 0.8, 1.0] {
        let img = image(level);
        assert_eq!(http.estimate_age(&img, None).unwrap().age, local.estimate_age(&img, None).unwrap().age);
        assert_eq!(http.activations(&img).unwrap(), local.activations(&img).unwrap());
    }
    assert_eq!(http.model_info().unwrap(), local.model_info().unwrap());
}
