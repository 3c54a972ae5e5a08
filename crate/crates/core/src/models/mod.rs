//! The DPCIPI classifier, its baselines, checkpoints and the ablation grid.

pub mod ablation;
pub mod checkpoint;
pub mod config;
pub mod dtree;
pub mod linear;
pub mod neural;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ablation::{run_ablation, AblationReport};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{EmbedInit, Task, TrainConfig};
pub use dtree::{train_dtree, DecisionTree};
pub use linear::{train_logistic, train_perceptron, LogisticModel, PerceptronModel};
pub use neural::{train_network, NeuralModel};

use crate::embed::{embed_sequence, gse_pool, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{argmax, confusion, ConfusionMatrix};
use crate::nn::{Architecture, Operator};
use crate::preprocess::PreprocessedPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dpcipi,
    BilstmConcat,
    NnGse,
    LrSim,
    LrGse,
    PerceptronSim,
    PerceptronGse,
    DtreeSim,
    DtreeGse,
}

/// Scalar feature used by the statistical baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    /// Length-normalized aligned distance of the raw sequences.
    Similarity,
    /// Cosine similarity of the pooled k-mer embeddings.
    Gse,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::LrSim,
        ModelKind::LrGse,
        ModelKind::PerceptronSim,
        ModelKind::PerceptronGse,
        ModelKind::DtreeSim,
        ModelKind::DtreeGse,
        ModelKind::NnGse,
        ModelKind::BilstmConcat,
        ModelKind::Dpcipi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dpcipi => "dpcipi",
            ModelKind::BilstmConcat => "bilstm_concat",
            ModelKind::NnGse => "nn_gse",
            ModelKind::LrSim => "lr_sim",
            ModelKind::LrGse => "lr_gse",
            ModelKind::PerceptronSim => "perceptron_sim",
            ModelKind::PerceptronGse => "perceptron_gse",
            ModelKind::DtreeSim => "dtree_sim",
            ModelKind::DtreeGse => "dtree_gse",
        }
    }

    pub fn feature(self) -> Option<Feature> {
        match self {
            ModelKind::LrSim | ModelKind::PerceptronSim | ModelKind::DtreeSim => Some(Feature::Similarity),
            ModelKind::LrGse | ModelKind::PerceptronGse | ModelKind::DtreeGse => Some(Feature::Gse),
            _ => None,
        }
    }

    /// Whether the model reads the embedding table.
    pub fn needs_table(self) -> bool {
        self.feature() != Some(Feature::Similarity)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum ModelParams {
    Neural(NeuralModel),
    Logistic(LogisticModel),
    Perceptron(PerceptronModel),
    Tree(DecisionTree),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub config: TrainConfig,
    /// Mean training loss per epoch; empty for the closed-form baselines.
    pub history: Vec<f64>,
    /// Fingerprint of the embedding table the model was trained against.
    pub table_fingerprint: Option<String>,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn task(&self) -> Task {
        self.config.task
    }

    /// Fusion operator of a siamese network.
    pub fn operator(&self) -> Option<Operator> {
        match &self.params {
            ModelParams::Neural(n) => match n.network.spec().architecture {
                Architecture::Siamese { operator } => Some(operator),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn ensure_task(&self, task: Task) -> Result<()> {
        if self.task() != task {
            return Err(Error::TaskMismatch {
                model: self.task().to_string(),
                requested: task.to_string(),
            });
        }
        Ok(())
    }

    /// Class probabilities for one preprocessed pair.
    pub fn predict(&self, pair: &PreprocessedPair, table: Option<&EmbeddingTable>) -> Result<Vec<f64>> {
        let table_for = |kind: ModelKind| -> Result<&EmbeddingTable> {
            let t = table.ok_or_else(|| Error::Config(format!("model '{kind}' needs an embedding table")))?;
            if let Some(fp) = &self.table_fingerprint {
                if &t.fingerprint() != fp {
                    log::warn!("embedding table differs from the one used for training");
                }
            }
            Ok(t)
        };
        match &self.params {
            ModelParams::Neural(n) => n.predict(table_for(self.kind)?, pair),
            ModelParams::Logistic(m) => Ok(m.predict(self.feature_of(pair, table)?)),
            ModelParams::Perceptron(m) => Ok(m.predict(self.feature_of(pair, table)?)),
            ModelParams::Tree(t) => Ok(t.predict(self.feature_of(pair, table)?)),
        }
    }

    fn feature_of(&self, pair: &PreprocessedPair, table: Option<&EmbeddingTable>) -> Result<f64> {
        match self.kind.feature() {
            Some(Feature::Similarity) => Ok(pair.similarity),
            Some(Feature::Gse) => {
                let t = table.ok_or_else(|| Error::Config(format!("model '{}' needs an embedding table", self.kind)))?;
                gse_similarity(pair, t)
            }
            None => unreachable!("neural models have no scalar feature"),
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine similarity between the mean-pooled embeddings of the two
/// deduplicated strains; 0 when either pooled vector is zero.
pub fn gse_similarity(pair: &PreprocessedPair, table: &EmbeddingTable) -> Result<f64> {
    let p = gse_pool(&embed_sequence(table, &pair.reference_kmers())?);
    let r = gse_pool(&embed_sequence(table, &pair.test_kmers())?);
    Ok(cosine(&p, &r))
}

/// Scalar feature of every pair.
pub fn features(feature: Feature, pairs: &[PreprocessedPair], table: Option<&EmbeddingTable>) -> Result<Vec<f64>> {
    match feature {
        Feature::Similarity => Ok(pairs.iter().map(|p| p.similarity).collect()),
        Feature::Gse => {
            let t = table.ok_or_else(|| Error::Config("GSE features need an embedding table".into()))?;
            pairs.par_iter().map(|p| gse_similarity(p, t)).collect()
        }
    }
}

/// Trains any model kind on preprocessed training pairs.
pub fn train_model(
    kind: ModelKind,
    pairs: &[PreprocessedPair],
    table: Option<&EmbeddingTable>,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    if pairs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let task = cfg.task;
    let labels: Vec<usize> = pairs.iter().map(|p| task.label(p)).collect();
    let need_table = || table.ok_or_else(|| Error::Config(format!("model '{kind}' needs an embedding table")));

    let (params, history) = match kind {
        ModelKind::Dpcipi | ModelKind::BilstmConcat | ModelKind::NnGse => {
            let arch = match kind {
                ModelKind::Dpcipi => Architecture::Siamese { operator: cfg.operator },
                ModelKind::BilstmConcat => Architecture::Joint,
                _ => Architecture::Pooled,
            };
            let (model, history) = train_network(arch, pairs, need_table()?, cfg)?;
            (ModelParams::Neural(model), history)
        }
        _ => {
            let feature = kind.feature().expect("statistical kinds have a feature");
            let xs = features(feature, pairs, table)?;
            let params = match kind {
                ModelKind::LrSim | ModelKind::LrGse => ModelParams::Logistic(train_logistic(&xs, &labels, task)?),
                ModelKind::PerceptronSim | ModelKind::PerceptronGse => {
                    ModelParams::Perceptron(train_perceptron(&xs, &labels, task)?)
                }
                _ => ModelParams::Tree(train_dtree(&xs, &labels, task.classes(), dtree::DEFAULT_MAX_DEPTH)?),
            };
            (params, Vec::new())
        }
    };
    let table_fingerprint = if kind.needs_table() {
        table.map(EmbeddingTable::fingerprint)
    } else {
        None
    };
    Ok(TrainedModel {
        kind,
        config: cfg.clone(),
        history,
        table_fingerprint,
        params,
    })
}

pub fn train_dpcipi(pairs: &[PreprocessedPair], table: &EmbeddingTable, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_model(ModelKind::Dpcipi, pairs, Some(table), cfg)
}

pub fn train_bilstm_concat(
    pairs: &[PreprocessedPair],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    train_model(ModelKind::BilstmConcat, pairs, Some(table), cfg)
}

/// Predicted class of every pair, in input order.
pub fn predict_classes(
    model: &TrainedModel,
    pairs: &[PreprocessedPair],
    table: Option<&EmbeddingTable>,
) -> Result<Vec<usize>> {
    pairs
        .par_iter()
        .map(|p| model.predict(p, table).map(|probs| argmax(&probs)))
        .collect()
}

/// Confusion matrix of `model` on `pairs` under the model's task.
pub fn evaluate(
    model: &TrainedModel,
    pairs: &[PreprocessedPair],
    table: Option<&EmbeddingTable>,
) -> Result<ConfusionMatrix> {
    let preds = predict_classes(model, pairs, table)?;
    let labels: Vec<usize> = pairs.iter().map(|p| model.task().label(p)).collect();
    confusion(&preds, &labels, model.task().classes())
}

/// Accuracy of always predicting the most frequent training class.
pub fn majority_accuracy(train: &[PreprocessedPair], test: &[PreprocessedPair], task: Task) -> f64 {
    let mut counts = vec![0usize; task.classes()];
    for p in train {
        counts[task.label(p)] += 1;
    }
    let majority = (0..counts.len()).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(0);
    if test.is_empty() {
        return 0.0;
    }
    test.iter().filter(|p| task.label(p) == majority).count() as f64 / test.len() as f64
}
