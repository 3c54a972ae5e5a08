//! Run configuration: one JSON file plus per-command flag overrides.

use std::path::{Path, PathBuf};

use anyhow::Context;
use dpcipi::models::{EmbedInit, Task, TrainConfig};
use dpcipi::nn::Operator;
use dpcipi::PreprocessOptions;
use serde::{Deserialize, Serialize};

pub const WORKDIR_ENV: &str = "DPCIPI_WORKDIR";
pub const DEFAULT_WORKDIR: &str = "dpcipi-work";
/// Width of randomly initialized tables when no pretrained table is at hand.
pub const DEFAULT_EMBEDDING_DIM: usize = 768;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub fasta: Option<PathBuf>,
    pub hi_csv: Option<PathBuf>,
    pub embedding_table: Option<PathBuf>,
    pub workdir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub train: TrainConfig,
    pub preprocess: PreprocessOptions,
    pub embedding_dim: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            train: TrainConfig::default(),
            preprocess: PreprocessOptions::default(),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Working directory for all generated files.
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// binary | multilevel
    #[arg(long, global = true)]
    pub task: Option<Task>,
    /// mii | concat
    #[arg(long, global = true)]
    pub operator: Option<Operator>,
    /// pretrained | random
    #[arg(long, global = true, value_parser = ["pretrained", "random"])]
    pub init: Option<String>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
}

/// The effective configuration of one command.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub run: RunConfig,
    pub workdir: PathBuf,
    /// Task named by a flag or the config file.
    pub requested_task: Option<Task>,
}

impl Resolved {
    pub fn workfile(&self, name: &str) -> PathBuf {
        self.workdir.join(name)
    }
}

pub fn resolve(o: &Overrides) -> anyhow::Result<Resolved> {
    let (mut run, file_task) = match &o.config {
        Some(path) => load(path)?,
        None => (RunConfig::default(), None),
    };
    let t = &mut run.train;
    if let Some(seed) = o.seed {
        t.seed = seed;
    }
    if let Some(task) = o.task {
        t.task = task;
    }
    if let Some(op) = o.operator {
        t.operator = op;
    }
    if let Some(epochs) = o.epochs {
        t.epochs = epochs;
    }
    match o.init.as_deref() {
        Some("pretrained") => t.embed_init = EmbedInit::Pretrained,
        Some(_) => t.embed_init = EmbedInit::Random { seed: t.seed },
        None => {}
    }
    run.preprocess.k = t.k;
    t.validate()?;

    let workdir = o
        .workdir
        .clone()
        .or_else(|| std::env::var_os(WORKDIR_ENV).map(PathBuf::from))
        .or_else(|| run.paths.workdir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_WORKDIR));
    Ok(Resolved {
        requested_task: o.task.or(file_task),
        run,
        workdir,
    })
}

fn load(path: &Path) -> anyhow::Result<(RunConfig, Option<Task>)> {
    let text = dpcipi::error::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(dpcipi::Error::from)?;
    let file_task = value
        .pointer("/train/task")
        .map(|t| serde_json::from_value::<Task>(t.clone()))
        .transpose()
        .map_err(dpcipi::Error::from)?;
    let run: RunConfig = serde_json::from_value(value)
        .map_err(dpcipi::Error::from)
        .with_context(|| format!("invalid config {}", path.display()))?;
    // relative input paths are taken relative to the config file
    let base = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: &mut Option<PathBuf>| {
        if let Some(inner) = p {
            if inner.is_relative() {
                *inner = base.join(&*inner);
            }
        }
    };
    let mut run = run;
    rebase(&mut run.paths.fasta);
    rebase(&mut run.paths.hi_csv);
    rebase(&mut run.paths.embedding_table);
    rebase(&mut run.paths.workdir);
    Ok((run, file_task))
}
