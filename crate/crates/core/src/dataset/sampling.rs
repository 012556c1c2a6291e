//! Stratified subsampling to a target demographic distribution.

use std::collections::BTreeMap;

use super::demographics::{assign_age_bin, AgeBin, Demographics};
use super::manifest::{DatasetManifest, Gender, ManifestRecord};
use crate::rng::CounterRng;

const SUBSAMPLE_DOMAIN: u64 = 0x5355_4253; // "SUBS"

fn cell_key(gender: Gender, bin: AgeBin) -> u64 {
    let g = match gender {
        Gender::Male => 0,
        Gender::Female => 1,
        Gender::Unknown => 2,
    };
    g * AgeBin::ALL.len() as u64 + bin.index() as u64
}

/// Draws `min(target, available)` records per (gender, bin) cell without
/// replacement. Each cell is sorted by id and shuffled with a stream keyed by
/// `(seed, gender, bin)`, so the result does not depend on record order.
/// Records with unknown gender, no age, or age above 100 are never selected.
/// The output is sorted by id.
pub fn subsample_to_target(
    manifest: &DatasetManifest,
    target: &Demographics,
    seed: u64,
) -> DatasetManifest {
    let mut cells: BTreeMap<(Gender, AgeBin), Vec<&ManifestRecord>> = BTreeMap::new();
    for r in manifest.records() {
        if r.gender == Gender::Unknown {
            continue;
        }
        let Some(bin) = r.age.and_then(|a| assign_age_bin(i64::from(a)).ok()) else {
            continue;
        };
        cells.entry((r.gender, bin)).or_default().push(r);
    }
    let rng = CounterRng::new(seed, SUBSAMPLE_DOMAIN);
    let mut picked = Vec::new();
    for ((gender, bin), mut records) in cells {
        let want = target.get(gender, bin) as usize;
        if want == 0 {
            continue;
        }
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut stream = rng.stream(cell_key(gender, bin));
        for i in (1..records.len()).rev() {
            let j = stream.below(i + 1);
            records.swap(i, j);
        }
        picked.extend(records.into_iter().take(want).cloned());
    }
    picked.sort_by(|a, b| a.id.cmp(&b.id));
    manifest.replace_records(picked)
}
