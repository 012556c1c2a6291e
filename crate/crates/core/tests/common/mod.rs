//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use shortcut_probe_core::dataset::{DatasetManifest, Gender, ManifestRecord};
use shortcut_probe_core::Image;

/// Writes a flat RGB PNG with the given 8-bit channel levels.
pub fn write_flat_png(path: &Path, rgb: [u8; 3]) {
    let image = Image::from_fn(16, 16, |_, _, c| f64::from(rgb[c]) / 255.0).unwrap();
    image.save_png(path).unwrap();
}

pub fn record(id: &str, path: &str, age: Option<u32>, gender: Gender, known: Option<bool>) -> ManifestRecord {
    ManifestRecord {
        id: id.to_string(),
        path: PathBuf::from(path),
        age,
        gender,
        identity: None,
        source: "synthetic".into(),
        known,
    }
}

/// Writes `images/<id>.png` for each entry and a manifest next to them.
pub fn write_manifest(dir: &Path, name: &str, entries: &[(String, [u8; 3], Option<u32>, Option<bool>)]) -> PathBuf {
    let images = dir.join("images");
    fs::create_dir_all(&images).unwrap();
    let mut records = Vec::new();
    for (id, rgb, age, known) in entries {
        let rel = format!("images/{id}.png");
        write_flat_png(&dir.join(&rel), *rgb);
        records.push(record(id, &rel, *age, Gender::Unknown, *known));
    }
    let path = dir.join(format!("{name}.jsonl"));
    DatasetManifest::new(records).unwrap().save(&path).unwrap();
    path
}

/// Every regular file under `dir` except the cache, keyed by relative path.
pub fn report_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            if path.is_dir() {
                if rel != "cache" {
                    walk(root, &path, out);
                }
            } else {
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Datasets for a run that exercises all three experiments.
pub struct Fixture {
    pub eval: PathBuf,
    pub anchor_known: PathBuf,
    pub anchor_unknown: PathBuf,
}

pub fn full_fixture(dir: &Path) -> Fixture {
    let eval: Vec<_> = (0..16u32)
        .map(|i| {
            let level = (30 + i * 11) as u8;
            let rgb = [level, level.wrapping_add(7), level / 2];
            (format!("e{i:02}"), rgb, Some(20 + i * 3), Some(i % 2 == 0))
        })
        .collect();
    let anchor = |prefix: &str, base: u32| -> Vec<_> {
        (0..12u32)
            .map(|i| {
                let level = (base + i * 5) as u8;
                (format!("{prefix}{i:02}"), [level, level / 3, 255 - level], None, None)
            })
            .collect()
    };
    Fixture {
        eval: write_manifest(dir, "faces", &eval),
        anchor_known: write_manifest(dir, "celebs", &anchor("k", 150)),
        anchor_unknown: write_manifest(dir, "strangers", &anchor("u", 20)),
    }
}

/// TOML for a run over `fixture` against `endpoint` with two estimators.
pub fn full_config(fixture: &Fixture, endpoint: &str, output_dir: &Path) -> String {
    format!(
        r#"
output_dir = "{out}"
concurrency_limit = 4
corruptions = [
  {{ kind = "brightness", severity = 0.5 }},
  {{ kind = "contrast", severity = 0.25 }},
  {{ kind = "gaussian_noise", severity = 0.75 }},
]

[seeds]
corruption_seed = 11

[steering]
enabled = true
alpha = 3.0

[[estimators]]
role = "subject"
endpoint = "{endpoint}"
model_id = "subject"

[[estimators]]
role = "surrogate"
endpoint = "{endpoint}"
model_id = "surrogate"

[[datasets]]
path = "{eval}"
role = "eval"

[[datasets]]
path = "{known}"
role = "anchor_known"

[[datasets]]
path = "{unknown}"
role = "anchor_unknown"
"#,
        out = output_dir.display(),
        eval = fixture.eval.display(),
        known = fixture.anchor_known.display(),
        unknown = fixture.anchor_unknown.display(),
    )
}
