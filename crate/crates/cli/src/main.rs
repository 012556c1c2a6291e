//! `shortcut-probe`: run identity-shortcut experiments and their building blocks.

mod manifest;
mod metrics;
mod tv;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use shortcut_probe_core::corruption::{apply_corruption, corruption_catalog, resolve_params, CorruptionKind, CorruptionSpec, Severity};
use shortcut_probe_core::gateway::{Endpoint, EstimatorClient, EstimatorHandle, MockModel, MockServer};
use shortcut_probe_core::orchestrator::{Experiment, ExperimentConfig, OrchestratorError, Runner};
use shortcut_probe_core::Image;

#[derive(Parser)]
#[command(name = "shortcut-probe", version, about = "Identity-shortcut evaluation harness for zero-shot age estimators")]
struct Cli {
    /// Log filter, e.g. `info` or `shortcut_probe_core=debug`.
    #[arg(long, global = true, env = "SHORTCUT_PROBE_LOG", default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments described by a config file.
    Run(RunArgs),
    /// Apply corruptions to an image.
    Corrupt(CorruptArgs),
    /// Print the corruption kinds, severities and their parameters as JSON.
    Catalog,
    /// Build, inspect, subsample and split dataset manifests.
    #[command(subcommand)]
    Manifest(manifest::ManifestCommand),
    /// Compute metrics from prediction tables.
    #[command(subcommand)]
    Metrics(metrics::MetricsCommand),
    /// Build task vectors, anchors, membership ratios and steering vectors.
    #[command(subcommand)]
    Tv(tv::TvCommand),
    /// Serve the deterministic mock model over the wire protocol.
    ServeMock {
        /// Port on 127.0.0.1; 0 picks a free one.
        #[arg(long, default_value_t = 8089)]
        port: u16,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run a single experiment: `shortcut`, `robustness` or `steering`.
    #[arg(long, value_parser = parse_experiment)]
    only: Option<Experiment>,
    /// Overrides `output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides `cache_dir`; defaults to `<output_dir>/cache`.
    #[arg(long, env = "SHORTCUT_PROBE_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Replaces the endpoint of every configured estimator.
    #[arg(long, env = "SHORTCUT_PROBE_ENDPOINT")]
    endpoint: Option<Endpoint>,
    /// Overrides `concurrency_limit`.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Overrides `failure_budget`, the tolerated fraction of failed requests.
    #[arg(long)]
    failure_budget: Option<f64>,
    /// Overrides `seeds.corruption_seed`.
    #[arg(long)]
    corruption_seed: Option<u64>,
    /// Overrides `steering.alpha`.
    #[arg(long)]
    alpha: Option<f64>,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse()
}

#[derive(Args)]
struct CorruptArgs {
    /// Input image.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory; receives `<stem>_<kind>_<severity>.png` and a JSON
    /// sidecar with the resolved parameters.
    #[arg(long)]
    out: PathBuf,
    /// Kind name, or `all`.
    #[arg(long)]
    kind: String,
    /// One of 0.25, 0.5, 0.75, 0.99, or `all`.
    #[arg(long)]
    severity: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Estimator connection flags shared by subcommands that query a model.
#[derive(Args, Clone)]
pub struct EndpointArgs {
    /// `mock` or the base URL of a protocol server.
    #[arg(long, env = "SHORTCUT_PROBE_ENDPOINT", default_value = "mock")]
    pub endpoint: Endpoint,
    #[arg(long, default_value = "mock")]
    pub model_id: String,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
}

impl EndpointArgs {
    pub fn client(&self) -> Result<EstimatorClient> {
        let handle = EstimatorHandle::new(self.endpoint.clone(), self.model_id.clone());
        Ok(EstimatorClient::connect(handle)?)
    }
}

/// Pretty JSON to `out`, or stdout when absent.
pub fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<OrchestratorError>()
                .map_or(1, OrchestratorError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => run(args),
        Command::Corrupt(args) => corrupt(args),
        Command::Catalog => catalog(),
        Command::Manifest(cmd) => manifest::dispatch(cmd),
        Command::Metrics(cmd) => metrics::dispatch(cmd),
        Command::Tv(cmd) => tv::dispatch(cmd),
        Command::ServeMock { port } => {
            let server = MockServer::start(Arc::new(MockModel::default()), port)
                .with_context(|| format!("binding port {port}"))?;
            eprintln!("mock model listening on {}", server.url());
            server.join();
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(dir) = args.output_dir {
        config.output_dir = dir;
    }
    if let Some(dir) = args.cache_dir {
        config.cache_dir = Some(dir);
    }
    if let Some(endpoint) = args.endpoint {
        for e in &mut config.estimators {
            e.handle.endpoint = endpoint.clone();
        }
    }
    if let Some(n) = args.concurrency {
        config.concurrency_limit = n;
    }
    if let Some(b) = args.failure_budget {
        config.failure_budget = b;
    }
    if let Some(s) = args.corruption_seed {
        config.seeds.corruption_seed = s;
    }
    if let Some(a) = args.alpha {
        config.steering.alpha = Some(a);
    }
    let runner = Runner::new(config)?;
    let outputs = runner.run(args.only)?;
    eprintln!(
        "wrote {} shortcut, {} robustness and {} steering report(s) to {}",
        outputs.shortcut.len(),
        outputs.robustness.len(),
        outputs.steering.len(),
        runner.config().output_dir.display()
    );
    Ok(())
}

fn corrupt(args: CorruptArgs) -> Result<()> {
    let kinds: Vec<CorruptionKind> = if args.kind == "all" {
        CorruptionKind::ALL.to_vec()
    } else {
        vec![args.kind.parse()?]
    };
    let severities: Vec<Severity> = if args.severity == "all" {
        Severity::ALL.to_vec()
    } else {
        let v: f64 = args
            .severity
            .parse()
            .with_context(|| format!("severity `{}` is not a number", args.severity))?;
        vec![Severity::from_f64(v)?]
    };
    let image = Image::load(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let stem = args
        .input
        .file_stem()
        .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
    fs::create_dir_all(&args.out)?;
    for &kind in &kinds {
        for &severity in &severities {
            let spec = CorruptionSpec {
                kind,
                severity,
                seed: args.seed,
            };
            let out = apply_corruption(&image, &spec)?;
            let base = format!("{stem}_{kind}_{severity}");
            out.save_png(args.out.join(format!("{base}.png")))?;
            let sidecar = serde_json::json!({
                "spec": spec,
                "params": resolve_params(kind, severity.value())?,
            });
            emit(&sidecar, Some(&args.out.join(format!("{base}.json"))))?;
        }
    }
    Ok(())
}

fn catalog() -> Result<()> {
    let entries: Vec<serde_json::Value> = corruption_catalog()
        .into_iter()
        .map(|entry| {
            let params: Vec<serde_json::Value> = entry
                .severities
                .iter()
                .map(|s| {
                    let p = resolve_params(entry.kind, s.value()).expect("catalog severities resolve");
                    serde_json::json!({ "severity": s, "params": p })
                })
                .collect();
            serde_json::json!({ "kind": entry.kind, "levels": params })
        })
        .collect();
    emit(&entries, None)
}

/// Reads a CSV file into typed rows.
pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        rows.push(row.with_context(|| format!("{} row {}", path.display(), i + 2))?);
    }
    if rows.is_empty() {
        bail!("{} has no rows", path.display());
    }
    Ok(rows)
}
