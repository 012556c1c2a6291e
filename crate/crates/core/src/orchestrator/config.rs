//! TOML experiment configuration.
//!
//! ```toml
//! output_dir = "runs/celeba"
//! corruptions = "all"            # or [{ kind = "fog", severity = 0.5 }, ...]
//!
//! [seeds]
//! corruption_seed = 7
//!
//! [steering]
//! enabled = true
//! alpha = 3.0
//!
//! [[estimators]]
//! role = "subject"
//! endpoint = "http://127.0.0.1:8080"
//! model_id = "qwen-vl"
//!
//! [[datasets]]
//! path = "celeba_split.jsonl"
//! role = "eval"
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use super::OrchestratorError;
use crate::corruption::{CorruptionKind, CorruptionSpec, Severity};
use crate::gateway::EstimatorHandle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorRole {
    /// The estimator under evaluation (`f`).
    Subject,
    /// An estimator without identity knowledge (`g`).
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub role: EstimatorRole,
    #[serde(flatten)]
    pub handle: EstimatorHandle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    Eval,
    AnchorKnown,
    AnchorUnknown,
    /// Eval manifests are subsampled to this manifest's demographics.
    DemographicTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub role: DatasetRole,
    /// Report key; defaults to the manifest's file stem.
    #[serde(default)]
    pub name: Option<String>,
}

impl DatasetConfig {
    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionEntry {
    pub kind: CorruptionKind,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorruptionSelection {
    All,
    List(Vec<CorruptionEntry>),
}

impl Serialize for CorruptionSelection {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            CorruptionSelection::All => serializer.serialize_str("all"),
            CorruptionSelection::List(l) => l.serialize(serializer),
        }
    }
}

impl Default for CorruptionSelection {
    fn default() -> Self {
        CorruptionSelection::List(Vec::new())
    }
}

impl<'de> Deserialize<'de> for CorruptionSelection {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            List(Vec<CorruptionEntry>),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Word(w) if w == "all" => Ok(CorruptionSelection::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "corruptions must be \"all\" or a list, got \"{w}\""
            ))),
            Raw::List(l) => Ok(CorruptionSelection::List(l)),
        }
    }
}

impl CorruptionSelection {
    /// Concrete specs in table order (kind, then severity), deduplicated.
    pub fn specs(&self, seed: u64) -> Vec<CorruptionSpec> {
        let mut specs: Vec<CorruptionSpec> = match self {
            CorruptionSelection::All => CorruptionKind::ALL
                .iter()
                .flat_map(|&kind| {
                    Severity::ALL.iter().map(move |&severity| CorruptionSpec { kind, severity, seed })
                })
                .collect(),
            CorruptionSelection::List(l) => l
                .iter()
                .map(|e| CorruptionSpec {
                    kind: e.kind,
                    severity: e.severity,
                    seed,
                })
                .collect(),
        };
        specs.sort();
        specs.dedup();
        specs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Seeds {
    #[serde(default)]
    pub corruption_seed: u64,
    #[serde(default)]
    pub subsample_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SteeringConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub alpha: Option<f64>,
}

fn default_concurrency() -> usize {
    4
}
fn default_failure_budget() -> f64 {
    0.10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub estimators: Vec<EstimatorConfig>,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub corruptions: CorruptionSelection,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub steering: SteeringConfig,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    /// Largest tolerated fraction of failed requests before a run aborts.
    #[serde(default = "default_failure_budget")]
    pub failure_budget: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, OrchestratorError> {
        toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))
    }

    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, OrchestratorError> {
        let text = fs::read_to_string(path)
            .map_err(|e| OrchestratorError::Config(format!("reading {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.rebase(base);
        Ok(config)
    }

    pub fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            join(&mut d.path);
        }
        join(&mut self.output_dir);
        if let Some(c) = &mut self.cache_dir {
            join(c);
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn estimator(&self, role: EstimatorRole) -> Option<&EstimatorConfig> {
        self.estimators.iter().find(|e| e.role == role)
    }

    pub fn datasets_with(&self, role: DatasetRole) -> impl Iterator<Item = &DatasetConfig> {
        self.datasets.iter().filter(move |d| d.role == role)
    }

    /// Static checks; also creates `output_dir` to prove it is writable.
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let fail = |m: String| Err(OrchestratorError::Config(m));
        if self.estimators.is_empty() {
            return fail("at least one estimator is required".into());
        }
        if self.datasets.is_empty() {
            return fail("at least one dataset is required".into());
        }
        for e in &self.estimators {
            e.handle
                .validate()
                .map_err(|err| OrchestratorError::Config(err.to_string()))?;
        }
        let mut ids: Vec<&str> = self.estimators.iter().map(|e| e.handle.model_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return fail("estimator model_id values must be distinct".into());
        }
        let mut names: Vec<String> = self.datasets.iter().map(DatasetConfig::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return fail("dataset names must be distinct".into());
        }
        if self.steering.enabled {
            match self.steering.alpha {
                None => return fail("steering.alpha is required when steering is enabled".into()),
                Some(a) if !a.is_finite() => return fail(format!("steering.alpha {a} is not finite")),
                _ => {}
            }
        }
        if self.concurrency_limit == 0 {
            return fail("concurrency_limit must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            return fail(format!("failure_budget {} is outside [0, 1]", self.failure_budget));
        }
        fs::create_dir_all(&self.output_dir).map_err(|e| {
            OrchestratorError::Config(format!("output_dir {}: {e}", self.output_dir.display()))
        })?;
        let probe = self.output_dir.join(".write-probe");
        fs::write(&probe, b"")
            .and_then(|_| fs::remove_file(&probe))
            .map_err(|e| {
                OrchestratorError::Config(format!("output_dir {} is not writable: {e}", self.output_dir.display()))
            })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Endpoint;

    const SAMPLE: &str = r#"
output_dir = "out"
corruptions = [{ kind = "fog", severity = 0.5 }, { kind = "brightness", severity = 0.25 }]

[seeds]
corruption_seed = 7

[steering]
enabled = true
alpha = 3.0

[[estimators]]
role = "subject"
endpoint = "mock"
model_id = "f"
temperature = 0

[[estimators]]
role = "surrogate"
endpoint = "http://127.0.0.1:9000"
model_id = "g"
retry_budget = 0

[[datasets]]
path = "data/celeba.jsonl"
role = "eval"
"#;

    #[test]
    fn parses_and_rebases() {
        let mut c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        c.rebase(Path::new("/base"));
        assert_eq!(c.output_dir, Path::new("/base/out"));
        assert_eq!(c.cache_dir(), Path::new("/base/out/cache"));
        assert_eq!(c.datasets[0].path, Path::new("/base/data/celeba.jsonl"));
        assert_eq!(c.datasets[0].name(), "celeba");
        assert_eq!(c.concurrency_limit, 4);
        assert_eq!(c.failure_budget, 0.10);
        let g = c.estimator(EstimatorRole::Surrogate).unwrap();
        assert_eq!(g.handle.endpoint, Endpoint::Http("http://127.0.0.1:9000".into()));
        assert_eq!((g.handle.retry_budget, g.handle.max_tokens), (0, 10));
        let specs = c.corruptions.specs(7);
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].kind, CorruptionKind::Fog);
    }

    #[test]
    fn corruption_selection_forms() {
        let all: CorruptionSelection = toml::from_str::<toml::Value>("c = \"all\"").unwrap()["c"]
            .clone()
            .try_into()
            .unwrap();
        assert_eq!(all.specs(0).len(), 76);
        let bad = ExperimentConfig::from_toml(&SAMPLE.replace(
            "corruptions = [{ kind = \"fog\", severity = 0.5 }, { kind = \"brightness\", severity = 0.25 }]",
            "corruptions = \"some\"",
        ));
        assert!(bad.is_err());
        let bad_sev = ExperimentConfig::from_toml(&SAMPLE.replace("severity = 0.5", "severity = 0.6"));
        assert!(bad_sev.is_err());
    }

    #[test]
    fn validation_rules() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        c.rebase(dir.path());
        assert!(c.validate().is_ok());
        let mut no_alpha = c.clone();
        no_alpha.steering.alpha = None;
        assert!(matches!(no_alpha.validate(), Err(OrchestratorError::Config(_))));
        let mut dup = c.clone();
        dup.estimators[1].handle.model_id = "f".into();
        assert!(dup.validate().is_err());
        let mut empty = c;
        empty.estimators.clear();
        assert!(empty.validate().is_err());
    }
}
