//! Known/unknown partition from identification results.

use std::collections::BTreeMap;

use super::manifest::DatasetManifest;
use super::DatasetError;
use crate::gateway::{match_identity, IdentityAnswer};

/// A record is known when it carries a ground-truth identity that the answer
/// matches, or carries none and the answer was verified.
pub fn split_known_unknown(
    manifest: &DatasetManifest,
    results: &BTreeMap<String, IdentityAnswer>,
) -> Result<DatasetManifest, DatasetError> {
    let missing: Vec<&str> = manifest
        .records()
        .iter()
        .filter(|r| !results.contains_key(&r.id))
        .map(|r| r.id.as_str())
        .collect();
    if let Some(first) = missing.first() {
        return Err(DatasetError::IncompleteResults {
            missing: missing.len(),
            first: first.to_string(),
        });
    }
    let records = manifest
        .records()
        .iter()
        .map(|r| {
            let answer = &results[&r.id];
            let known = match &r.identity {
                Some(truth) => answer
                    .name
                    .as_deref()
                    .is_some_and(|name| match_identity(name, truth)),
                None => answer.verified == Some(true),
            };
            let mut r = r.clone();
            r.known = Some(known);
            r
        })
        .collect();
    Ok(manifest.replace_records(records))
}
