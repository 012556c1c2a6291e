//! Experiment execution against cached estimator clients.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use super::cache::{CachedResponse, RequestKey, RequestKind, RunCache};
use super::config::{DatasetConfig, DatasetRole, EstimatorRole, ExperimentConfig};
use super::plot::emit_plot_data;
use super::pool::run_pool;
use super::reports::{
    slug, write_csv, write_json, FailureRecord, RobustnessOutput, RunOutputs, ShortcutOutput, ShortcutRecord,
    SteeringOutput, SteeringSample,
};
use super::{Experiment, OrchestratorError};
use crate::corruption::{apply_corruption, CorruptionSpec};
use crate::dataset::{measure_demographics, subsample_to_target, DatasetManifest};
use crate::gateway::protocol::{ActivationsResponse, ModelInfo};
use crate::gateway::{AgeEstimate, EstimatorClient, GatewayError, SidecarBehavior};
use crate::image::Image;
use crate::metrics::{
    mae, mean_abs_disagreement, robustness_profile, shortcut_impact, DeviationRecord, MeanSem,
    PairedPrediction, PairedPredictions, SubsetTag,
};
use crate::taskvector::{
    build_task_vector, mean_task_vector, steering_vector, AnchorProvenance, DensityMethod,
    MembershipModel, SteeringVector, TaskVector, TaskVectorDistribution, TaskVectorError,
    MIN_DISTRIBUTION_SAMPLES,
};

pub struct Runner {
    config: ExperimentConfig,
    cache: RunCache,
    clients: BTreeMap<String, Arc<EstimatorClient>>,
    request_limit: Option<usize>,
    issued: AtomicUsize,
    cancelled: AtomicBool,
}

/// A loaded manifest under its report name.
struct Dataset {
    name: String,
    manifest: DatasetManifest,
}

/// Decodes an image at most once per work item.
struct LazyImage {
    path: PathBuf,
    cell: OnceLock<Result<Image, String>>,
}

impl LazyImage {
    fn new(path: PathBuf) -> Self {
        Self {
            path,
            cell: OnceLock::new(),
        }
    }

    fn get(&self) -> Result<&Image, OrchestratorError> {
        self.cell
            .get_or_init(|| Image::load(&self.path).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|message| OrchestratorError::Image {
                path: self.path.display().to_string(),
                message: message.clone(),
            })
    }
}

/// Per-request outcomes of one experiment.
#[derive(Default)]
struct Tally {
    total: usize,
    failures: Vec<FailureRecord>,
}

impl Tally {
    /// Records a request outcome; cancellation propagates immediately.
    fn absorb<T>(
        &mut self,
        result: Result<T, OrchestratorError>,
        context: impl FnOnce(String) -> FailureRecord,
    ) -> Result<Option<T>, OrchestratorError> {
        self.total += 1;
        match result {
            Ok(v) => Ok(Some(v)),
            Err(OrchestratorError::Cancelled) => Err(OrchestratorError::Cancelled),
            Err(e) => {
                let record = context(e.to_string());
                log::warn!("{} {} ({}): {}", record.dataset, record.id, record.estimator, record.error);
                self.failures.push(record);
                Ok(None)
            }
        }
    }
}

fn failure(estimator: &str, dataset: &str, id: &str, corruption: Option<&CorruptionSpec>) -> impl FnOnce(String) -> FailureRecord {
    let (estimator, dataset, id) = (estimator.to_string(), dataset.to_string(), id.to_string());
    let corruption = corruption.map(CorruptionSpec::label);
    move |error| FailureRecord {
        dataset,
        id,
        corruption,
        estimator,
        error,
    }
}

impl Runner {
    /// Validates the config, opens the cache and connects every estimator.
    pub fn new(config: ExperimentConfig) -> Result<Self, OrchestratorError> {
        config.validate()?;
        let cache = RunCache::open(&config.cache_dir())?;
        let clients = config
            .estimators
            .iter()
            .map(|e| {
                EstimatorClient::connect(e.handle.clone())
                    .map(|c| (e.handle.model_id.clone(), Arc::new(c)))
                    .map_err(|err| OrchestratorError::Config(err.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            config,
            cache,
            clients,
            request_limit: None,
            issued: AtomicUsize::new(0),
            cancelled: AtomicBool::new(false),
        })
    }

    /// Serves the estimator `model_id` from `behavior` in-process.
    pub fn with_behavior(
        mut self,
        model_id: &str,
        behavior: Arc<dyn SidecarBehavior>,
    ) -> Result<Self, OrchestratorError> {
        let handle = self
            .clients
            .get(model_id)
            .ok_or_else(|| OrchestratorError::Config(format!("no estimator `{model_id}`")))?
            .handle()
            .clone();
        let client = EstimatorClient::in_process(handle, behavior)
            .map_err(|e| OrchestratorError::Config(e.to_string()))?;
        self.clients.insert(model_id.to_string(), Arc::new(client));
        Ok(self)
    }

    /// Cancels the run once `n` uncached requests have been issued, as if the
    /// process had been stopped there.
    pub fn stop_after_requests(mut self, n: usize) -> Self {
        self.request_limit = Some(n);
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn cache(&self) -> &RunCache {
        &self.cache
    }

    /// Uncached requests issued so far.
    pub fn requests_issued(&self) -> usize {
        self.issued.load(Ordering::Relaxed).min(self.request_limit.unwrap_or(usize::MAX))
    }

    /// Runs `only`, or every experiment the config supports, then writes the
    /// plot bundle.
    pub fn run(&self, only: Option<Experiment>) -> Result<RunOutputs, OrchestratorError> {
        let selected: Vec<Experiment> = match only {
            Some(e) => vec![e],
            None => {
                let mut v = Vec::new();
                if self.config.estimator(EstimatorRole::Surrogate).is_some() {
                    v.push(Experiment::Shortcut);
                }
                if !self.config.corruptions.specs(0).is_empty() {
                    v.push(Experiment::Robustness);
                }
                if self.config.steering.enabled {
                    v.push(Experiment::Steering);
                }
                if v.is_empty() {
                    return Err(OrchestratorError::Config(
                        "nothing to run: add a surrogate estimator, corruptions, or enable steering".into(),
                    ));
                }
                v
            }
        };
        let mut out = RunOutputs::default();
        for e in selected {
            log::info!("running {e} experiment");
            match e {
                Experiment::Shortcut => out.shortcut = self.run_shortcut()?,
                Experiment::Robustness => out.robustness = self.run_robustness()?,
                Experiment::Steering => out.steering = self.run_steering()?,
            }
        }
        emit_plot_data(&out, &self.config.output_dir)?;
        log::info!(
            "cache: {} hits, {} new entries",
            self.cache.hits(),
            self.cache.appended()
        );
        Ok(out)
    }

    /// Disagreement between subject and surrogate on the known and unknown
    /// subsets of every eval dataset.
    pub fn run_shortcut(&self) -> Result<Vec<ShortcutOutput>, OrchestratorError> {
        let subject = self.estimator_id(EstimatorRole::Subject)?;
        let surrogate = self.estimator_id(EstimatorRole::Surrogate)?;
        let datasets = self.eval_datasets()?;
        let mut tally = Tally::default();
        let mut collected = Vec::new();
        for ds in &datasets {
            let records = ds.manifest.records();
            if let Some(r) = records.iter().find(|r| r.known.is_none()) {
                return Err(OrchestratorError::Config(format!(
                    "dataset `{}` has no known/unknown split (record `{}`)",
                    ds.name, r.id
                )));
            }
            for (flag, subset) in [(true, "known"), (false, "unknown")] {
                if !records.iter().any(|r| r.known == Some(flag)) {
                    return Err(OrchestratorError::Config(format!(
                        "dataset `{}` has an empty {subset} subset",
                        ds.name
                    )));
                }
            }
            let results = run_pool(records, self.config.concurrency_limit, |r| {
                let image = LazyImage::new(ds.manifest.image_path(r));
                let f = self.estimate(&subject, &ds.name, &r.id, &image, None, None);
                let g = self.estimate(&surrogate, &ds.name, &r.id, &image, None, None);
                (f, g)
            });
            let mut rows = Vec::new();
            let start = tally.failures.len();
            for (r, (f, g)) in records.iter().zip(results) {
                let f = tally.absorb(f, failure(&subject, &ds.name, &r.id, None))?;
                let g = tally.absorb(g, failure(&surrogate, &ds.name, &r.id, None))?;
                if let (Some(f), Some(g)) = (f, g) {
                    rows.push(ShortcutRecord {
                        id: r.id.clone(),
                        known: r.known == Some(true),
                        label: r.age,
                        subject_pred: f.age.years(),
                        surrogate_pred: g.age.years(),
                    });
                }
            }
            rows.sort_by(|a, b| a.id.cmp(&b.id));
            collected.push((ds.name.as_str(), rows, tally.failures.len() - start));
        }
        self.finish(Experiment::Shortcut, tally)?;
        let outputs = collected
            .into_iter()
            .map(|(name, rows, failed)| shortcut_output(name, &subject, &surrogate, rows, failed))
            .collect::<Result<Vec<_>, _>>()?;
        for o in &outputs {
            let file = format!("shortcut_{}_{}.json", slug(&o.subject), slug(&o.dataset));
            write_json(&self.config.output_dir.join(file), o)?;
        }
        Ok(outputs)
    }

    /// Base and corrupted predictions of every estimator on every eval image.
    pub fn run_robustness(&self) -> Result<Vec<RobustnessOutput>, OrchestratorError> {
        let seed = self.config.seeds.corruption_seed;
        let specs = self.config.corruptions.specs(seed);
        if specs.is_empty() {
            return Err(OrchestratorError::Config("no corruptions configured".into()));
        }
        let datasets = self.eval_datasets()?;
        let mut tally = Tally::default();
        let mut collected = Vec::new();
        for estimator in self.clients.keys() {
            let mut deviations = Vec::new();
            let mut parse_failures = 0;
            let start = tally.failures.len();
            for ds in &datasets {
                let records = ds.manifest.records();
                let results = run_pool(records, self.config.concurrency_limit, |r| {
                    let image = LazyImage::new(ds.manifest.image_path(r));
                    let base = self.estimate(estimator, &ds.name, &r.id, &image, None, None);
                    let corrupted: Vec<_> = specs
                        .iter()
                        .map(|spec| self.estimate(estimator, &ds.name, &r.id, &image, Some(spec), None))
                        .collect();
                    (base, corrupted)
                });
                for (r, (base, corrupted)) in records.iter().zip(results) {
                    let base = tally.absorb(base, failure(estimator, &ds.name, &r.id, None))?;
                    for (spec, c) in specs.iter().zip(corrupted) {
                        let c = tally.absorb(c, failure(estimator, &ds.name, &r.id, Some(spec)))?;
                        let (Some(base), Some(c)) = (&base, c) else { continue };
                        match (base.age.years(), c.age.years()) {
                            (Some(b), Some(c)) => deviations.push(DeviationRecord {
                                corruption: *spec,
                                id: r.id.clone(),
                                dataset: ds.name.clone(),
                                base_pred: b,
                                corrupted_pred: c,
                            }),
                            _ => parse_failures += 1,
                        }
                    }
                }
            }
            deviations.sort_by(|a, b| {
                (&a.dataset, &a.id, &a.corruption).cmp(&(&b.dataset, &b.id, &b.corruption))
            });
            collected.push((estimator, deviations, parse_failures, tally.failures.len() - start));
        }
        self.finish(Experiment::Robustness, tally)?;
        let mut outputs = Vec::new();
        for (estimator, deviations, parse_failures, failed_requests) in collected {
            let report = robustness_profile(&deviations)?;
            for label in &report.zero_normalizer {
                log::warn!("{estimator}: {label} never changed a prediction; excluded from means");
            }
            write_deviation_csv(
                &self.config.output_dir.join(format!("robustness_{}_records.csv", slug(estimator))),
                &deviations,
            )?;
            outputs.push(RobustnessOutput {
                estimator: estimator.clone(),
                corruption_seed: seed,
                report,
                parse_failure_count: parse_failures,
                failed_requests,
            });
        }
        for o in &outputs {
            let file = format!("robustness_{}.json", slug(&o.estimator));
            write_json(&self.config.output_dir.join(file), o)?;
        }
        Ok(outputs)
    }

    /// Builds the steering vector from the anchor manifests and compares
    /// default and steered MAE on every eval dataset.
    pub fn run_steering(&self) -> Result<Vec<SteeringOutput>, OrchestratorError> {
        let alpha = match (self.config.steering.enabled, self.config.steering.alpha) {
            (true, Some(a)) => a,
            _ => {
                return Err(OrchestratorError::Config(
                    "steering experiment needs steering.enabled and steering.alpha".into(),
                ))
            }
        };
        let subject = self.estimator_id(EstimatorRole::Subject)?;
        let known = self.role_datasets(DatasetRole::AnchorKnown)?;
        let unknown = self.role_datasets(DatasetRole::AnchorUnknown)?;
        let datasets = self.eval_datasets()?;
        let info = self.model_info(&subject)?;
        if !info.supports_steering {
            return Err(GatewayError::SteeringUnsupported(format!(
                "{subject} does not advertise steering support"
            ))
            .into());
        }

        let mut tally = Tally::default();
        let known_vectors = self.anchor_vectors(&subject, &info, &known, &mut tally)?;
        let unknown_vectors = self.anchor_vectors(&subject, &info, &unknown, &mut tally)?;
        for (side, v) in [("known", &known_vectors), ("unknown", &unknown_vectors)] {
            if v.len() < MIN_DISTRIBUTION_SAMPLES {
                return Err(OrchestratorError::AnchorInsufficientSamples {
                    side,
                    got: v.len(),
                    needed: MIN_DISTRIBUTION_SAMPLES,
                });
            }
        }
        let t_k = mean_task_vector(&known_vectors)?;
        let t_nk = mean_task_vector(&unknown_vectors)?;
        let provenance = AnchorProvenance {
            known_source: join_names(&known),
            unknown_source: join_names(&unknown),
            known_ids: known_vectors.iter().map(|v| v.source_id.clone()).collect(),
            unknown_ids: unknown_vectors.iter().map(|v| v.source_id.clone()).collect(),
        };
        let steering = steering_vector(&t_k, &t_nk, alpha)?.with_provenance(provenance);
        let fingerprint = steering.fingerprint();
        let (n_known, n_unknown) = (known_vectors.len(), unknown_vectors.len());
        let membership = MembershipModel::fit(
            &TaskVectorDistribution::new(known_vectors)?,
            &TaskVectorDistribution::new(unknown_vectors)?,
            DensityMethod::Gaussian,
        );
        let membership = match membership {
            Ok(m) => Some(m),
            Err(TaskVectorError::DegenerateDistribution(side)) => {
                log::warn!("{side} anchor projections are degenerate; membership not reported");
                None
            }
            Err(e) => return Err(e.into()),
        };

        let mut outputs = Vec::new();
        for ds in &datasets {
            let records = ds.manifest.records();
            let results = run_pool(records, self.config.concurrency_limit, |r| {
                let image = LazyImage::new(ds.manifest.image_path(r));
                let default = self.estimate(&subject, &ds.name, &r.id, &image, None, None);
                let steered = self.estimate(&subject, &ds.name, &r.id, &image, None, Some(&steering));
                let acts = self.activations(&subject, &ds.name, &r.id, &image);
                (default, steered, acts)
            });
            let start = tally.failures.len();
            let mut samples = Vec::new();
            let mut vectors = Vec::new();
            for (r, (default, steered, acts)) in records.iter().zip(results) {
                let default = tally.absorb(default, failure(&subject, &ds.name, &r.id, None))?;
                let steered = tally.absorb(steered, failure(&subject, &ds.name, &r.id, None))?;
                let acts = tally.absorb(acts, failure(&subject, &ds.name, &r.id, None))?;
                let vector = match acts.map(|a| build_task_vector(&a, &info, r.id.clone())) {
                    Some(Ok(v)) => Some(v),
                    Some(Err(e)) => {
                        log::warn!("{} {}: {e}", ds.name, r.id);
                        None
                    }
                    None => None,
                };
                let (delta_k, member) = match (&vector, &membership) {
                    (Some(v), Some(m)) => (Some(m.project(v)?), Some(m.is_member(v)?)),
                    (Some(v), None) => (Some(crate::taskvector::delta_k(v, &t_k, &t_nk)?), None),
                    _ => (None, None),
                };
                if let Some(v) = vector {
                    vectors.push(v);
                }
                let mut sample = SteeringSample {
                    id: r.id.clone(),
                    label: r.age,
                    default_pred: default.and_then(|d| d.age.years()),
                    steered_pred: steered.and_then(|s| s.age.years()),
                    error_delta: None,
                    delta_k,
                    member,
                };
                sample.error_delta = sample.errors().map(|(d, s)| s - d);
                samples.push(sample);
            }
            samples.sort_by(|a, b| a.id.cmp(&b.id));
            let paired: Vec<(i64, i64)> = samples.iter().filter_map(SteeringSample::errors).collect();
            let (default_mae, steered_mae) = if paired.is_empty() {
                (None, None)
            } else {
                let d: Vec<(i64, i64)> = paired.iter().map(|&(d, _)| (d, 0)).collect();
                let s: Vec<(i64, i64)> = paired.iter().map(|&(_, s)| (s, 0)).collect();
                (Some(mae(&d)?), Some(mae(&s)?))
            };
            let shortcut_ratio = match &membership {
                Some(m) if !vectors.is_empty() => Some(m.ratio(&vectors)?),
                _ => None,
            };
            outputs.push(SteeringOutput {
                dataset: ds.name.clone(),
                estimator: subject.clone(),
                alpha,
                steering_fingerprint: fingerprint.clone(),
                mae_difference: default_mae.zip(steered_mae).map(|(d, s)| s.mean - d.mean),
                default_mae,
                steered_mae,
                shortcut_ratio,
                n_anchor_known: n_known,
                n_anchor_unknown: n_unknown,
                failed_requests: tally.failures.len() - start,
                samples,
            });
        }
        self.finish(Experiment::Steering, tally)?;
        steering.save(&self.config.output_dir.join(format!("steering_{}.sptv", slug(&subject))))?;
        for o in &outputs {
            let file = format!("steering_{}_{}.json", slug(&o.estimator), slug(&o.dataset));
            write_json(&self.config.output_dir.join(file), o)?;
        }
        Ok(outputs)
    }

    fn anchor_vectors(
        &self,
        estimator: &str,
        info: &ModelInfo,
        datasets: &[Dataset],
        tally: &mut Tally,
    ) -> Result<Vec<TaskVector>, OrchestratorError> {
        let mut vectors = Vec::new();
        for ds in datasets {
            let records = ds.manifest.records();
            let results = run_pool(records, self.config.concurrency_limit, |r| {
                let image = LazyImage::new(ds.manifest.image_path(r));
                self.activations(estimator, &ds.name, &r.id, &image)
                    .and_then(|a| Ok(build_task_vector(&a, info, format!("{}/{}", ds.name, r.id))?))
            });
            for (r, v) in records.iter().zip(results) {
                if let Some(v) = tally.absorb(v, failure(estimator, &ds.name, &r.id, None))? {
                    vectors.push(v);
                }
            }
        }
        Ok(vectors)
    }

    /// Writes the failure log and enforces the failure budget.
    fn finish(&self, experiment: Experiment, mut tally: Tally) -> Result<(), OrchestratorError> {
        tally.failures.sort();
        write_json(
            &self.config.output_dir.join(format!("failures_{experiment}.json")),
            &tally.failures,
        )?;
        let failed = tally.failures.len();
        if tally.total > 0 && failed as f64 > self.config.failure_budget * tally.total as f64 {
            return Err(OrchestratorError::Aborted {
                failed,
                total: tally.total,
                budget: self.config.failure_budget,
            });
        }
        Ok(())
    }

    fn estimator_id(&self, role: EstimatorRole) -> Result<String, OrchestratorError> {
        self.config
            .estimator(role)
            .map(|e| e.handle.model_id.clone())
            .ok_or_else(|| OrchestratorError::Config(format!("no estimator with role {role:?}")))
    }

    fn load(&self, cfg: &DatasetConfig) -> Result<Dataset, OrchestratorError> {
        let manifest = DatasetManifest::load(&cfg.path).map_err(|e| {
            OrchestratorError::Config(format!("dataset `{}` ({}): {e}", cfg.name(), cfg.path.display()))
        })?;
        Ok(Dataset {
            name: cfg.name(),
            manifest,
        })
    }

    fn role_datasets(&self, role: DatasetRole) -> Result<Vec<Dataset>, OrchestratorError> {
        let datasets: Vec<Dataset> = self
            .config
            .datasets_with(role)
            .map(|d| self.load(d))
            .collect::<Result<_, _>>()?;
        if datasets.is_empty() {
            return Err(OrchestratorError::Config(format!("no dataset with role {role:?}")));
        }
        Ok(datasets)
    }

    /// Eval manifests, subsampled to the demographic target when one is set.
    fn eval_datasets(&self) -> Result<Vec<Dataset>, OrchestratorError> {
        let mut datasets = self.role_datasets(DatasetRole::Eval)?;
        let target = self
            .config
            .datasets_with(DatasetRole::DemographicTarget)
            .map(|d| self.load(d))
            .collect::<Result<Vec<_>, _>>()?;
        match target.as_slice() {
            [] => {}
            [t] => {
                let demographics = measure_demographics(&t.manifest).map_err(|e| {
                    OrchestratorError::Config(format!("demographic target `{}`: {e}", t.name))
                })?;
                for ds in &mut datasets {
                    ds.manifest =
                        subsample_to_target(&ds.manifest, &demographics, self.config.seeds.subsample_seed);
                    log::info!("{}: subsampled to {} records", ds.name, ds.manifest.len());
                }
            }
            _ => {
                return Err(OrchestratorError::Config(
                    "at most one demographic_target dataset is allowed".into(),
                ))
            }
        }
        Ok(datasets)
    }

    fn client(&self, estimator: &str) -> &EstimatorClient {
        &self.clients[estimator]
    }

    fn cached(
        &self,
        key: RequestKey<'_>,
        issue: impl FnOnce() -> Result<CachedResponse, OrchestratorError>,
    ) -> Result<CachedResponse, OrchestratorError> {
        let digest = key.digest();
        if let Some(hit) = self.cache.get(&digest) {
            return Ok(hit);
        }
        if self.cancelled.load(Ordering::Relaxed) {
            return Err(OrchestratorError::Cancelled);
        }
        if let Some(limit) = self.request_limit {
            if self.issued.fetch_add(1, Ordering::SeqCst) >= limit {
                self.cancelled.store(true, Ordering::Relaxed);
                return Err(OrchestratorError::Cancelled);
            }
        } else {
            self.issued.fetch_add(1, Ordering::Relaxed);
        }
        let response = issue()?;
        self.cache.put(digest, response.clone())?;
        Ok(response)
    }

    fn estimate(
        &self,
        estimator: &str,
        dataset: &str,
        id: &str,
        image: &LazyImage,
        corruption: Option<&CorruptionSpec>,
        steering: Option<&SteeringVector>,
    ) -> Result<AgeEstimate, OrchestratorError> {
        let fingerprint = steering.map(SteeringVector::fingerprint);
        let key = RequestKey {
            estimator,
            dataset,
            image_id: id,
            corruption,
            steering: fingerprint.as_deref(),
            kind: RequestKind::Estimate,
        };
        let response = self.cached(key, || {
            let clean = image.get()?;
            let input = match corruption {
                Some(spec) => apply_corruption(clean, spec)?,
                None => clean.clone(),
            };
            Ok(CachedResponse::Estimate(self.client(estimator).estimate_age(&input, steering)?))
        })?;
        match response {
            CachedResponse::Estimate(e) => Ok(e),
            other => Err(mismatch(&other)),
        }
    }

    fn activations(
        &self,
        estimator: &str,
        dataset: &str,
        id: &str,
        image: &LazyImage,
    ) -> Result<ActivationsResponse, OrchestratorError> {
        let key = RequestKey {
            estimator,
            dataset,
            image_id: id,
            corruption: None,
            steering: None,
            kind: RequestKind::Activations,
        };
        match self.cached(key, || {
            Ok(CachedResponse::Activations(self.client(estimator).activations(image.get()?)?))
        })? {
            CachedResponse::Activations(a) => Ok(a),
            other => Err(mismatch(&other)),
        }
    }

    fn model_info(&self, estimator: &str) -> Result<ModelInfo, OrchestratorError> {
        let key = RequestKey {
            estimator,
            dataset: "",
            image_id: "",
            corruption: None,
            steering: None,
            kind: RequestKind::ModelInfo,
        };
        match self.cached(key, || Ok(CachedResponse::ModelInfo(self.client(estimator).model_info()?)))? {
            CachedResponse::ModelInfo(i) => Ok(i),
            other => Err(mismatch(&other)),
        }
    }
}

fn mismatch(found: &CachedResponse) -> OrchestratorError {
    let kind = match found {
        CachedResponse::Estimate(_) => "estimate",
        CachedResponse::Identify(_) => "identify",
        CachedResponse::Activations(_) => "activations",
        CachedResponse::ModelInfo(_) => "model_info",
    };
    OrchestratorError::Io(format!("cache entry holds a {kind} response for a different request kind"))
}

fn join_names(datasets: &[Dataset]) -> String {
    datasets.iter().map(|d| d.name.as_str()).collect::<Vec<_>>().join(",")
}

fn shortcut_output(
    dataset: &str,
    subject: &str,
    surrogate: &str,
    records: Vec<ShortcutRecord>,
    failed_requests: usize,
) -> Result<ShortcutOutput, OrchestratorError> {
    let mut parse_failures = 0;
    let mut known = Vec::new();
    let mut unknown = Vec::new();
    for r in &records {
        match (r.subject_pred, r.surrogate_pred) {
            (Some(f), Some(g)) => {
                let p = PairedPrediction {
                    id: r.id.clone(),
                    f_pred: f,
                    g_pred: g,
                };
                if r.known {
                    known.push(p);
                } else {
                    unknown.push(p);
                }
            }
            _ => parse_failures += 1,
        }
    }
    let (n_known, n_unknown) = (known.len(), unknown.len());
    let on_known = mean_abs_disagreement(&PairedPredictions {
        entries: known,
        subset: SubsetTag::Known,
    })?;
    let on_unknown = mean_abs_disagreement(&PairedPredictions {
        entries: unknown,
        subset: SubsetTag::Unknown,
    })?;
    let subject_mae = |flag: bool| -> Option<MeanSem> {
        let pairs: Vec<(i64, i64)> = records
            .iter()
            .filter(|r| r.known == flag)
            .filter_map(|r| Some((i64::from(r.subject_pred?), i64::from(r.label?))))
            .collect();
        mae(&pairs).ok()
    };
    Ok(ShortcutOutput {
        dataset: dataset.to_string(),
        subject: subject.to_string(),
        surrogate: surrogate.to_string(),
        report: shortcut_impact(on_known, on_unknown).with_counts(n_known, n_unknown, parse_failures),
        subject_mae_known: subject_mae(true),
        subject_mae_unknown: subject_mae(false),
        failed_requests,
        records,
    })
}

fn write_deviation_csv(path: &Path, records: &[DeviationRecord]) -> Result<(), OrchestratorError> {
    let rows = records.iter().map(|r| {
        vec![
            r.dataset.clone(),
            r.id.clone(),
            r.corruption.label(),
            r.corruption.seed.to_string(),
            r.base_pred.to_string(),
            r.corrupted_pred.to_string(),
            r.deviation().to_string(),
        ]
    });
    write_csv(
        path,
        &["dataset", "id", "corruption", "seed", "base_pred", "corrupted_pred", "deviation"],
        rows,
    )
}
