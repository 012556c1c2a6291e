//! Append-only response cache.
//!
//! Every response is appended to `log.jsonl` as `{"key": ..., "response": ...}`
//! and flushed before the caller sees it, so a killed run loses at most the
//! line being written. On open, a torn final line is cut off and every
//! complete line is loaded into an in-memory index.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::OrchestratorError;
use crate::corruption::CorruptionSpec;
use crate::gateway::protocol::{ActivationsResponse, ModelInfo};
use crate::gateway::{AgeEstimate, IdentityAnswer};
use crate::taskvector::hex;

pub const CACHE_LOG: &str = "log.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Estimate,
    Identify,
    Activations,
    ModelInfo,
}

impl RequestKind {
    fn tag(self) -> &'static str {
        match self {
            RequestKind::Estimate => "estimate",
            RequestKind::Identify => "identify",
            RequestKind::Activations => "activations",
            RequestKind::ModelInfo => "model_info",
        }
    }
}

/// Identifies one request: which estimator saw which image, under which
/// corruption and steering vector, for which endpoint.
#[derive(Debug, Clone, Copy)]
pub struct RequestKey<'a> {
    pub estimator: &'a str,
    pub dataset: &'a str,
    pub image_id: &'a str,
    pub corruption: Option<&'a CorruptionSpec>,
    /// Steering vector fingerprint.
    pub steering: Option<&'a str>,
    pub kind: RequestKind,
}

impl RequestKey<'_> {
    /// SHA-256 over the NUL-joined fields, hex encoded.
    pub fn digest(&self) -> String {
        let corruption = self
            .corruption
            .map_or_else(|| "clean".to_string(), ToString::to_string);
        let fields = [
            self.estimator,
            self.dataset,
            self.image_id,
            &corruption,
            self.steering.unwrap_or("none"),
            self.kind.tag(),
        ];
        let mut hasher = Sha256::new();
        for f in fields {
            hasher.update(f.as_bytes());
            hasher.update([0]);
        }
        hex(&hasher.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CachedResponse {
    Estimate(AgeEstimate),
    Identify(IdentityAnswer),
    Activations(ActivationsResponse),
    ModelInfo(ModelInfo),
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    response: CachedResponse,
}

struct Writer {
    file: File,
    index: HashMap<String, CachedResponse>,
}

pub struct RunCache {
    path: PathBuf,
    writer: Mutex<Writer>,
    hits: AtomicUsize,
    appended: AtomicUsize,
}

impl std::fmt::Debug for RunCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunCache").field("path", &self.path).finish_non_exhaustive()
    }
}

fn io_err(path: &Path, e: std::io::Error) -> OrchestratorError {
    OrchestratorError::Io(format!("{}: {e}", path.display()))
}

impl RunCache {
    pub fn open(dir: &Path) -> Result<Self, OrchestratorError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let path = dir.join(CACHE_LOG);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&path, e)),
        };
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let mut index = HashMap::new();
        for (n, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let entry: Entry = serde_json::from_slice(line).map_err(|e| {
                OrchestratorError::Io(format!("{} line {}: {e}", path.display(), n + 1))
            })?;
            index.insert(entry.key, entry.response);
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        if complete < bytes.len() {
            log::warn!(
                "dropping {} bytes of a torn final entry in {}",
                bytes.len() - complete,
                path.display()
            );
            file.set_len(complete as u64).map_err(|e| io_err(&path, e))?;
        }
        Ok(Self {
            path,
            writer: Mutex::new(Writer { file, index }),
            hits: AtomicUsize::new(0),
            appended: AtomicUsize::new(0),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<CachedResponse> {
        let hit = self.writer.lock().expect("cache lock").index.get(key).cloned();
        if hit.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        }
        hit
    }

    /// Appends and flushes one entry. A key already present is left as is.
    pub fn put(&self, key: String, response: CachedResponse) -> Result<(), OrchestratorError> {
        let mut w = self.writer.lock().expect("cache lock");
        if w.index.contains_key(&key) {
            return Ok(());
        }
        let mut line = serde_json::to_vec(&Entry {
            key: key.clone(),
            response: response.clone(),
        })
        .map_err(|e| OrchestratorError::Io(e.to_string()))?;
        line.push(b'\n');
        w.file
            .write_all(&line)
            .and_then(|_| w.file.flush())
            .map_err(|e| io_err(&self.path, e))?;
        w.index.insert(key, response);
        self.appended.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.writer.lock().expect("cache lock").index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    /// Entries written by this process.
    pub fn appended(&self) -> usize {
        self.appended.load(Ordering::Relaxed)
    }
}
