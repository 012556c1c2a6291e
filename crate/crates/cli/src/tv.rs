use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Subcommand, ValueEnum};
use serde::Serialize;
use shortcut_probe_core::dataset::DatasetManifest;
use shortcut_probe_core::orchestrator::run_pool;
use shortcut_probe_core::taskvector::{
    build_task_vector, mean_task_vector, read_container, steering_vector, write_container,
    DensityMethod, MembershipModel, TaskVector, TaskVectorDistribution,
};
use shortcut_probe_core::Image;

use crate::{emit, EndpointArgs};

#[derive(Clone, Copy, ValueEnum)]
pub enum Method {
    Gaussian,
    Empirical,
}

impl From<Method> for DensityMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Gaussian => DensityMethod::Gaussian,
            Method::Empirical => DensityMethod::EmpiricalQuantile,
        }
    }
}

#[derive(Subcommand)]
pub enum TvCommand {
    /// Extract one task vector per manifest record into a container.
    Build {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        endpoint: EndpointArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average known and unknown task vectors into a two-row anchor container
    /// (`t_k`, then `t_nk`).
    Anchors {
        #[arg(long)]
        known: PathBuf,
        #[arg(long)]
        unknown: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fraction of task vectors that fall in the known distribution.
    Ratio {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        known: PathBuf,
        #[arg(long)]
        unknown: PathBuf,
        #[arg(long, value_enum, default_value = "gaussian")]
        method: Method,
    },
    /// Write the steering vector `t_nk - t_k` from an anchor container.
    Steer {
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long, default_value_t = shortcut_probe_core::taskvector::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct Membership {
    id: String,
    delta_k: f64,
    p_known: f64,
    p_unknown: f64,
    member: bool,
}

#[derive(Serialize)]
struct RatioReport {
    ratio: f64,
    n: usize,
    members: Vec<Membership>,
}

fn load(path: &PathBuf) -> Result<Vec<TaskVector>> {
    read_container(path).with_context(|| format!("reading {}", path.display()))
}

pub fn dispatch(cmd: TvCommand) -> Result<()> {
    match cmd {
        TvCommand::Build { manifest, endpoint, out } => {
            let m = DatasetManifest::load(&manifest)?;
            let client = endpoint.client()?;
            let info = client.model_info()?;
            let vectors = run_pool(m.records(), endpoint.concurrency, |r| -> Result<TaskVector> {
                let path = m.image_path(r);
                let image = Image::load(&path).with_context(|| format!("reading {}", path.display()))?;
                Ok(build_task_vector(&client.activations(&image)?, &info, r.id.clone())?)
            });
            let vectors = m
                .records()
                .iter()
                .zip(vectors)
                .map(|(r, v)| v.with_context(|| format!("record `{}`", r.id)))
                .collect::<Result<Vec<_>>>()?;
            write_container(&out, &vectors)?;
            eprintln!("wrote {} task vectors to {}", vectors.len(), out.display());
        }
        TvCommand::Anchors { known, unknown, out } => {
            let mut t_k = mean_task_vector(&load(&known)?)?;
            let mut t_nk = mean_task_vector(&load(&unknown)?)?;
            t_k.source_id = "t_k".into();
            t_nk.source_id = "t_nk".into();
            write_container(&out, &[t_k, t_nk])?;
        }
        TvCommand::Ratio {
            vectors,
            known,
            unknown,
            method,
        } => {
            let model = MembershipModel::fit(
                &TaskVectorDistribution::new(load(&known)?)?,
                &TaskVectorDistribution::new(load(&unknown)?)?,
                method.into(),
            )?;
            let vectors = load(&vectors)?;
            let members = vectors
                .iter()
                .map(|v| {
                    let (p_known, p_unknown) = model.probabilities(v)?;
                    Ok(Membership {
                        id: v.source_id.clone(),
                        delta_k: model.project(v)?,
                        p_known,
                        p_unknown,
                        member: model.is_member(v)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            emit(
                &RatioReport {
                    ratio: model.ratio(&vectors)?,
                    n: vectors.len(),
                    members,
                },
                None,
            )?;
        }
        TvCommand::Steer { anchors, alpha, out } => {
            let rows = load(&anchors)?;
            let [t_k, t_nk] = <[TaskVector; 2]>::try_from(rows).map_err(|v| {
                anyhow::anyhow!("{} holds {} vectors, expected t_k and t_nk", anchors.display(), v.len())
            })?;
            if t_k.source_id != "t_k" || t_nk.source_id != "t_nk" {
                bail!("{} is not an anchor container", anchors.display());
            }
            let sv = steering_vector(&t_k, &t_nk, alpha)?;
            sv.save(&out)?;
            eprintln!("steering fingerprint {}", sv.fingerprint());
        }
    }
    Ok(())
}
