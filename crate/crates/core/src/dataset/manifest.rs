//! JSON Lines manifest: a schema header line, then one record per line.
//!
//! ```text
//! {"schema":"shortcut-probe-manifest","version":1}
//! {"id":"a01","path":"img/a01.png","age":34,"gender":"female","identity":"Jane Doe","source":"agedb"}
//! ```
//!
//! Relative image paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetError;

pub const MANIFEST_SCHEMA: &str = "shortcut-probe-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    #[default]
    Unknown,
}

impl Gender {
    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            "" | "unknown" | "u" => Ok(Gender::Unknown),
            other => Err(format!("unknown gender `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default)]
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<String>,
    #[serde(default)]
    pub source: String,
    /// Set only by the known/unknown split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    records: Vec<ManifestRecord>,
    root: PathBuf,
}

impl DatasetManifest {
    /// Validates id uniqueness and the age range.
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
            if let Some(age) = r.age {
                if age > 120 {
                    return Err(DatasetError::InvalidAge {
                        id: r.id.clone(),
                        age: i64::from(age),
                    });
                }
            }
        }
        Ok(Self {
            records,
            root: PathBuf::new(),
        })
    }

    /// Directory that relative image paths are resolved against.
    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = root.into();
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ManifestRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn image_path(&self, record: &ManifestRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    /// Records whose split flag equals `known`.
    pub fn subset(&self, known: bool) -> Vec<&ManifestRecord> {
        self.records
            .iter()
            .filter(|r| r.known == Some(known))
            .collect()
    }

    pub(crate) fn replace_records(&self, records: Vec<ManifestRecord>) -> Self {
        Self {
            records,
            root: self.root.clone(),
        }
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, DatasetError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| DatasetError::Header("empty manifest".into()))?;
        let header: Header =
            serde_json::from_str(header).map_err(|e| DatasetError::Header(e.to_string()))?;
        if header.schema != MANIFEST_SCHEMA || header.version != MANIFEST_VERSION {
            return Err(DatasetError::Header(format!(
                "expected {MANIFEST_SCHEMA} v{MANIFEST_VERSION}, found {} v{}",
                header.schema, header.version
            )));
        }
        let records = lines
            .map(|(i, line)| {
                serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<ManifestRecord>, _>>()?;
        Self::new(records)
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            schema: MANIFEST_SCHEMA.into(),
            version: MANIFEST_VERSION,
        };
        let mut out = serde_json::to_string(&header).expect("plain struct");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("plain struct"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self::parse_jsonl(&text)?.with_root(root))
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_jsonl()).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Builds records from a CSV labels table with columns `path`, `age`,
    /// `gender` and optionally `id` and `identity`. Missing ids default to
    /// the path; empty cells are absent labels.
    pub fn from_labels_csv(reader: impl Read, source: &str) -> Result<Self, DatasetError> {
        #[derive(Deserialize)]
        struct Row {
            #[serde(default)]
            id: Option<String>,
            path: String,
            #[serde(default)]
            age: Option<String>,
            #[serde(default)]
            gender: Option<String>,
            #[serde(default)]
            identity: Option<String>,
        }
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut records = Vec::new();
        for (i, row) in csv.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| DatasetError::Labels(format!("row {line}: {e}")))?;
            let age = match row.age.as_deref().filter(|a| !a.is_empty()) {
                None => None,
                Some(a) => Some(a.parse::<u32>().map_err(|_| {
                    DatasetError::Labels(format!("row {line}: age `{a}` is not a non-negative integer"))
                })?),
            };
            let gender = row
                .gender
                .as_deref()
                .unwrap_or("")
                .parse()
                .map_err(|e| DatasetError::Labels(format!("row {line}: {e}")))?;
            records.push(ManifestRecord {
                id: row.id.filter(|s| !s.is_empty()).unwrap_or_else(|| row.path.clone()),
                path: PathBuf::from(&row.path),
                age,
                gender,
                identity: row.identity.filter(|s| !s.is_empty()),
                source: source.to_string(),
                known: None,
            });
        }
        Self::new(records)
    }
}
