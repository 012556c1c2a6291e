use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Subcommand;
use shortcut_probe_core::dataset::{
    measure_demographics, split_known_unknown, subsample_to_target, DatasetManifest, Demographics,
};
use shortcut_probe_core::gateway::IdentityAnswer;
use shortcut_probe_core::orchestrator::run_pool;
use shortcut_probe_core::Image;

use crate::{emit, EndpointArgs};

#[derive(Subcommand)]
pub enum ManifestCommand {
    /// Build a manifest from a CSV labels table (`path,age,gender[,id,identity]`).
    Build {
        #[arg(long)]
        labels: PathBuf,
        /// Dataset name stored on every record.
        #[arg(long)]
        source: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count records per (gender, age bin).
    Demographics {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample records to match a target distribution.
    Subsample {
        #[arg(long)]
        manifest: PathBuf,
        /// Demographics JSON, or a manifest (`.jsonl`) whose demographics are used.
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ask an estimator who is pictured; writes `{id: answer}` JSON.
    Identify {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        endpoint: EndpointArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tag records known/unknown from identification results.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn dispatch(cmd: ManifestCommand) -> Result<()> {
    match cmd {
        ManifestCommand::Build { labels, source, out } => {
            let file = fs::File::open(&labels).with_context(|| format!("opening {}", labels.display()))?;
            let manifest = DatasetManifest::from_labels_csv(file, &source)?;
            manifest.save(&out)?;
            eprintln!("wrote {} records to {}", manifest.len(), out.display());
        }
        ManifestCommand::Demographics { manifest, out } => {
            let m = DatasetManifest::load(&manifest)?;
            emit(&measure_demographics(&m)?, out.as_deref())?;
        }
        ManifestCommand::Subsample {
            manifest,
            target,
            seed,
            out,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let target: Demographics = if target.extension().is_some_and(|e| e == "jsonl") {
                measure_demographics(&DatasetManifest::load(&target)?)?
            } else {
                let text = fs::read_to_string(&target).with_context(|| format!("reading {}", target.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", target.display()))?
            };
            let sampled = subsample_to_target(&m, &target, seed);
            sampled.save(&out)?;
            eprintln!("selected {} of {} records", sampled.len(), m.len());
        }
        ManifestCommand::Identify {
            manifest,
            endpoint,
            out,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let client = endpoint.client()?;
            let answers = run_pool(m.records(), endpoint.concurrency, |r| -> Result<IdentityAnswer> {
                let path = m.image_path(r);
                let image = Image::load(&path).with_context(|| format!("reading {}", path.display()))?;
                let answer = client.identify(&image)?;
                // Without a ground-truth name, a named answer is confirmed in a
                // separate single-turn request.
                match (&r.identity, &answer.name) {
                    (None, Some(name)) => {
                        let verified = client.verify_identity(&image, name)?;
                        Ok(IdentityAnswer::named(name.clone(), Some(verified)))
                    }
                    _ => Ok(answer),
                }
            });
            let mut results = BTreeMap::new();
            for (r, a) in m.records().iter().zip(answers) {
                results.insert(r.id.clone(), a.with_context(|| format!("record `{}`", r.id))?);
            }
            emit(&results, Some(&out))?;
        }
        ManifestCommand::Split {
            manifest,
            results,
            out,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let text = fs::read_to_string(&results).with_context(|| format!("reading {}", results.display()))?;
            let answers: BTreeMap<String, IdentityAnswer> =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", results.display()))?;
            let split = split_known_unknown(&m, &answers)?;
            split.save(&out)?;
            let known = split.subset(true).len();
            eprintln!("{known} known, {} unknown", split.len() - known);
        }
    }
    Ok(())
}
