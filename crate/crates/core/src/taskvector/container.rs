//! Binary task-vector container with a JSON metadata sidecar.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic            4 bytes  "SPTV"
//! version          u32      1
//! model_id_len     u32      byte length of the UTF-8 model id
//! model_id         bytes
//! layer_count_used u32
//! per_layer_dim    u32
//! count            u32      number of vectors
//! values           count * layer_count_used * per_layer_dim f32
//! ```
//!
//! Values are stored as 32-bit floats, so a round trip rounds each component
//! to `f32`. The sidecar `<file>.meta.json` records the source id of every
//! vector, the anchor provenance and, for steering vectors, alpha.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::vector::TaskVector;
use super::TaskVectorError;

pub const CONTAINER_MAGIC: [u8; 4] = *b"SPTV";
pub const CONTAINER_VERSION: u32 = 1;

/// Where the anchors of a steering vector came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorProvenance {
    pub known_source: String,
    pub unknown_source: String,
    pub known_ids: Vec<String>,
    pub unknown_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerMetadata {
    pub model_id: String,
    pub source_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_provenance: Option<AnchorProvenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

pub fn metadata_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes dimension-compatible `vectors` and their metadata.
pub fn write_container(path: &Path, vectors: &[TaskVector]) -> Result<(), TaskVectorError> {
    let first = vectors.first().ok_or(TaskVectorError::EmptyInput)?;
    for v in &vectors[1..] {
        first.check_compatible(v)?;
    }
    let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
    let meta = ContainerMetadata {
        model_id: first.model_id.clone(),
        source_ids: vectors.iter().map(|v| v.source_id.clone()).collect(),
        anchor_provenance: None,
        alpha: None,
    };
    write_rows(
        path,
        &first.model_id,
        first.layer_count_used,
        first.per_layer_dim,
        &rows,
        &meta,
    )
}

pub(crate) fn write_rows(
    path: &Path,
    model_id: &str,
    layers: usize,
    dim: usize,
    rows: &[Vec<f64>],
    meta: &ContainerMetadata,
) -> Result<(), TaskVectorError> {
    let u32_of = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| TaskVectorError::Format(format!("{what} {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(32 + model_id.len() + rows.len() * layers * dim * 4);
    out.extend_from_slice(&CONTAINER_MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&u32_of(model_id.len(), "model id length")?.to_le_bytes());
    out.extend_from_slice(model_id.as_bytes());
    out.extend_from_slice(&u32_of(layers, "layer count")?.to_le_bytes());
    out.extend_from_slice(&u32_of(dim, "layer dimension")?.to_le_bytes());
    out.extend_from_slice(&u32_of(rows.len(), "vector count")?.to_le_bytes());
    for row in rows {
        if row.len() != layers * dim {
            return Err(TaskVectorError::DimensionMismatch(format!(
                "row of {} values in a {layers}x{dim} container",
                row.len()
            )));
        }
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&out)?;
    write_metadata(path, meta)
}

pub fn write_metadata(path: &Path, meta: &ContainerMetadata) -> Result<(), TaskVectorError> {
    let json = serde_json::to_string_pretty(meta).map_err(|e| TaskVectorError::Format(e.to_string()))?;
    fs::write(metadata_path(path), json + "\n")?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<ContainerMetadata, TaskVectorError> {
    let text = fs::read_to_string(metadata_path(path))?;
    serde_json::from_str(&text).map_err(|e| TaskVectorError::Format(e.to_string()))
}

/// Reads every vector. Source ids come from the metadata sidecar when it
/// exists, otherwise they are `#0`, `#1`, ...
pub fn read_container(path: &Path) -> Result<Vec<TaskVector>, TaskVectorError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = Cursor { bytes: &bytes, pos: 0 };
    if cursor.take(4)? != CONTAINER_MAGIC {
        return Err(TaskVectorError::Format("bad magic".into()));
    }
    let version = cursor.u32()?;
    if version != CONTAINER_VERSION {
        return Err(TaskVectorError::Format(format!("unsupported version {version}")));
    }
    let id_len = cursor.u32()? as usize;
    let model_id = String::from_utf8(cursor.take(id_len)?.to_vec())
        .map_err(|_| TaskVectorError::Format("model id is not UTF-8".into()))?;
    let layers = cursor.u32()? as usize;
    let dim = cursor.u32()? as usize;
    let count = cursor.u32()? as usize;
    let meta = metadata_path(path)
        .exists()
        .then(|| read_metadata(path))
        .transpose()?;
    if let Some(m) = &meta {
        if m.source_ids.len() != count {
            return Err(TaskVectorError::Format(format!(
                "metadata lists {} source ids for {count} vectors",
                m.source_ids.len()
            )));
        }
    }
    let mut vectors = Vec::with_capacity(count);
    for i in 0..count {
        let raw = cursor.take(layers * dim * 4)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        let source_id = meta
            .as_ref()
            .map_or_else(|| format!("#{i}"), |m| m.source_ids[i].clone());
        vectors.push(TaskVector::new(model_id.clone(), layers, dim, values, source_id)?);
    }
    if cursor.pos != bytes.len() {
        return Err(TaskVectorError::Format("trailing bytes after values".into()));
    }
    Ok(vectors)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TaskVectorError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| TaskVectorError::Format("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, TaskVectorError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.sptv");
        let v = TaskVector::new("toy", 2, 1, vec![1.5, -2.0], "img-1").unwrap();
        write_container(&path, &[v.clone()]).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"SPTV");
        assert_eq!(bytes[4..8], 1u32.to_le_bytes());
        assert_eq!(bytes[8..12], 3u32.to_le_bytes());
        assert_eq!(&bytes[12..15], b"toy");
        assert_eq!(bytes[15..19], 2u32.to_le_bytes());
        assert_eq!(bytes[19..23], 1u32.to_le_bytes());
        assert_eq!(bytes[23..27], 1u32.to_le_bytes());
        assert_eq!(bytes[27..31], 1.5f32.to_le_bytes());
        assert_eq!(bytes.len(), 35);
        assert_eq!(read_container(&path).unwrap(), [v]);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.sptv");
        let v = TaskVector::new("toy", 1, 2, vec![1.0, 2.0], "a").unwrap();
        write_container(&path, &[v]).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_container(&path), Err(TaskVectorError::Format(_))));
    }
}
