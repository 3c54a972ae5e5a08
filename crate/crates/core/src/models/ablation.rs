//! The initialization × fusion-operator grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EmbedInit, Task, TrainConfig};
use super::{evaluate, train_model, ModelKind};
use crate::embed::{random_table, EmbeddingTable};
use crate::error::Result;
use crate::eval::{weighted_metrics, Metrics};
use crate::nn::Operator;
use crate::preprocess::PreprocessedPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Pretrained,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSeeds {
    pub training: u64,
    pub random_table: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub init: InitKind,
    pub operator: Operator,
    pub metrics: Metrics,
}

/// `a - b` for one metric, in percentage points and relative to `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub comparison: String,
    pub metric: String,
    pub points: f64,
    /// `None` when the baseline value is zero.
    pub relative_percent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskAblation {
    pub task: Task,
    pub rows: Vec<AblationRow>,
    pub improvements: Vec<Improvement>,
}

impl TaskAblation {
    pub fn row(&self, init: InitKind, operator: Operator) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.init == init && r.operator == operator)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: AblationSeeds,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub tasks: Vec<TaskAblation>,
}

pub const GRID: [(InitKind, Operator); 4] = [
    (InitKind::Pretrained, Operator::Mii),
    (InitKind::Pretrained, Operator::Concat),
    (InitKind::Random, Operator::Mii),
    (InitKind::Random, Operator::Concat),
];

fn metric_values(m: &Metrics) -> [(&'static str, f64); 4] {
    [
        ("accuracy", m.accuracy),
        ("weighted_f1", m.weighted_f1),
        ("weighted_precision", m.weighted_precision),
        ("weighted_recall", m.weighted_recall),
    ]
}

fn improvements(comparison: &str, a: &Metrics, b: &Metrics) -> Vec<Improvement> {
    metric_values(a)
        .into_iter()
        .zip(metric_values(b))
        .map(|((name, va), (_, vb))| Improvement {
            comparison: comparison.to_string(),
            metric: name.to_string(),
            points: (va - vb) * 100.0,
            relative_percent: (vb != 0.0).then(|| (va - vb) / vb * 100.0),
        })
        .collect()
}

/// Trains DPCIPI on every grid cell for each task and evaluates on `test`.
/// The random table has the pretrained table's shape and is seeded from
/// `cfg.embed_init` when it is `Random`, otherwise from `cfg.seed`.
pub fn run_ablation(
    train: &[PreprocessedPair],
    test: &[PreprocessedPair],
    pretrained: &EmbeddingTable,
    tasks: &[Task],
    cfg: &TrainConfig,
) -> Result<AblationReport> {
    let random_seed = match cfg.embed_init {
        EmbedInit::Random { seed } => seed,
        EmbedInit::Pretrained => cfg.seed,
    };
    let random = random_table(pretrained.k(), pretrained.dim(), random_seed);

    let cells: Vec<(Task, InitKind, Operator)> = tasks
        .iter()
        .flat_map(|&t| GRID.iter().map(move |&(i, o)| (t, i, o)))
        .collect();
    let results: Vec<Metrics> = cells
        .par_iter()
        .map(|&(task, init, operator)| {
            let (table, embed_init) = match init {
                InitKind::Pretrained => (pretrained, EmbedInit::Pretrained),
                InitKind::Random => (&random, EmbedInit::Random { seed: random_seed }),
            };
            let cell_cfg = TrainConfig {
                task,
                operator,
                embed_init,
                ..cfg.clone()
            };
            let model = train_model(ModelKind::Dpcipi, train, Some(table), &cell_cfg)?;
            weighted_metrics(&evaluate(&model, test, Some(table))?)
        })
        .collect::<Result<_>>()?;

    let tasks = tasks
        .iter()
        .enumerate()
        .map(|(ti, &task)| {
            let rows: Vec<AblationRow> = GRID
                .iter()
                .enumerate()
                .map(|(gi, &(init, operator))| AblationRow {
                    init,
                    operator,
                    metrics: results[ti * GRID.len() + gi],
                })
                .collect();
            let mut imp = improvements("pretrained_vs_random", &rows[0].metrics, &rows[2].metrics);
            imp.extend(improvements("mii_vs_concat", &rows[0].metrics, &rows[1].metrics));
            TaskAblation {
                task,
                rows,
                improvements: imp,
            }
        })
        .collect();

    Ok(AblationReport {
        seeds: AblationSeeds {
            training: cfg.seed,
            random_table: random_seed,
        },
        train_pairs: train.len(),
        test_pairs: test.len(),
        tasks,
    })
}
