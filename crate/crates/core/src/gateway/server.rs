//! HTTP front end serving any [`SidecarBehavior`] on the wire protocol.

use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::de::DeserializeOwned;
use serde::Serialize;
use tiny_http::{Header, Method, Request, Response, Server};

use super::mock::{SidecarBehavior, SidecarError};
use super::protocol::{ErrorBody, ACTIVATIONS_PATH, ESTIMATE_PATH, IDENTIFY_PATH, MODEL_INFO_PATH};

/// Background HTTP server bound to a local port; stops when dropped.
pub struct MockServer {
    server: Arc<Server>,
    addr: SocketAddr,
    requests: Arc<AtomicUsize>,
    worker: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `127.0.0.1:port` (`0` picks a free port) and serves in a thread.
    pub fn start(behavior: Arc<dyn SidecarBehavior>, port: u16) -> io::Result<Self> {
        let server = Arc::new(Server::http(("127.0.0.1", port)).map_err(io::Error::other)?);
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| io::Error::other("server is not bound to an IP socket"))?;
        let requests = Arc::new(AtomicUsize::new(0));
        let worker = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    requests.fetch_add(1, Ordering::SeqCst);
                    respond(behavior.as_ref(), request);
                }
            })
        };
        Ok(Self {
            server,
            addr,
            requests,
            worker: Some(worker),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received so far, including rejected ones.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Blocks until the server thread exits.
    pub fn join(mut self) {
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

fn respond(behavior: &dyn SidecarBehavior, mut request: Request) {
    let mut body = String::new();
    let result = match request.as_reader().read_to_string(&mut body) {
        Err(e) => Err(SidecarError::bad_request(format!("unreadable body: {e}"))),
        Ok(_) => route(behavior, request.method(), request.url(), &body),
    };
    let (status, json) = match result {
        Ok(json) => (200, json),
        Err(e) => {
            let body = serde_json::to_string(&ErrorBody { error: e.message }).expect("plain struct");
            (e.status, body)
        }
    };
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let response = Response::from_string(json)
        .with_status_code(status)
        .with_header(header);
    if let Err(e) = request.respond(response) {
        log::warn!("failed to send response: {e}");
    }
}

fn route(
    behavior: &dyn SidecarBehavior,
    method: &Method,
    url: &str,
    body: &str,
) -> Result<String, SidecarError> {
    let path = url.split('?').next().unwrap_or(url);
    match (method, path) {
        (Method::Get, MODEL_INFO_PATH) => to_json(&behavior.model_info()),
        (Method::Post, ESTIMATE_PATH) => to_json(&behavior.estimate(&parse(body)?)?),
        (Method::Post, IDENTIFY_PATH) => to_json(&behavior.identify(&parse(body)?)?),
        (Method::Post, ACTIVATIONS_PATH) => to_json(&behavior.activations(&parse(body)?)?),
        (_, MODEL_INFO_PATH | ESTIMATE_PATH | IDENTIFY_PATH | ACTIVATIONS_PATH) => {
            Err(SidecarError::new(405, format!("method not allowed on {path}")))
        }
        _ => Err(SidecarError::new(404, format!("no route for {path}"))),
    }
}

fn parse<T: DeserializeOwned>(body: &str) -> Result<T, SidecarError> {
    serde_json::from_str(body).map_err(|e| SidecarError::bad_request(format!("malformed body: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, SidecarError> {
    serde_json::to_string(value).map_err(|e| SidecarError::new(500, e.to_string()))
}
