//! Labeled image manifests, demographic matching and the known/unknown split.

mod demographics;
mod manifest;
mod sampling;
mod split;

use thiserror::Error;

pub use demographics::{assign_age_bin, measure_demographics, AgeBin, CellCounts, Demographics};
pub use manifest::{DatasetManifest, Gender, ManifestRecord, MANIFEST_SCHEMA, MANIFEST_VERSION};
pub use sampling::subsample_to_target;
pub use split::split_known_unknown;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("manifest header missing or invalid: {0}")]
    Header(String),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{id}` has age {age}, outside [0, 120]")]
    InvalidAge { id: String, age: i64 },
    #[error("record `{id}` lacks a {label} label")]
    MissingLabel { id: String, label: &'static str },
    #[error("age {0} is outside the binned range [0, 100]")]
    OutOfRange(i64),
    #[error("identity results missing for {missing} record(s), first `{first}`")]
    IncompleteResults { missing: usize, first: String },
    #[error("labels table: {0}")]
    Labels(String),
}
