//! Mini-batch Adam training of the neural pair classifiers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::embed::{row_sources, EmbeddingTable};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, Architecture, Network, NetworkSpec, PairSources};
use crate::preprocess::PreprocessedPair;

/// A network together with its parameter values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NeuralRepr", into = "NeuralRepr")]
pub struct NeuralModel {
    pub network: Network,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NeuralRepr {
    spec: NetworkSpec,
    tensors: Vec<NamedTensor>,
}

impl From<NeuralModel> for NeuralRepr {
    fn from(m: NeuralModel) -> Self {
        let tensors = m
            .network
            .layout()
            .entries()
            .iter()
            .map(|e| NamedTensor {
                name: e.name.clone(),
                shape: e.shape.clone(),
                data: m.params[e.range()].to_vec(),
            })
            .collect();
        NeuralRepr {
            spec: m.network.spec().clone(),
            tensors,
        }
    }
}

impl TryFrom<NeuralRepr> for NeuralModel {
    type Error = Error;

    fn try_from(repr: NeuralRepr) -> Result<Self> {
        let network = Network::new(repr.spec)?;
        let mut params = vec![0.0; network.num_params()];
        let entries = network.layout().entries();
        if entries.len() != repr.tensors.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {} tensors, network expects {}",
                repr.tensors.len(),
                entries.len()
            )));
        }
        for (entry, tensor) in entries.iter().zip(&repr.tensors) {
            if entry.name != tensor.name || entry.shape != tensor.shape || tensor.data.len() != entry.size() {
                return Err(Error::Format(format!(
                    "tensor '{}' {:?} does not match expected '{}' {:?}",
                    tensor.name, tensor.shape, entry.name, entry.shape
                )));
            }
            params[entry.range()].copy_from_slice(&tensor.data);
        }
        Ok(NeuralModel { network, params })
    }
}

impl NeuralModel {
    pub fn predict(&self, table: &EmbeddingTable, pair: &PreprocessedPair) -> Result<Vec<f64>> {
        let sources = pair_sources(table, pair)?;
        self.network.predict(&self.params, table.raw_vectors(), &sources)
    }
}

/// Resolves both token lists of a pair against the table.
pub fn pair_sources(table: &EmbeddingTable, pair: &PreprocessedPair) -> Result<PairSources> {
    Ok(PairSources {
        reference: row_sources(table, &pair.reference_kmers())?,
        test: row_sources(table, &pair.test_kmers())?,
    })
}

/// Shuffled example order for one epoch; a pure function of `(seed, epoch)`.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Trains `architecture` for `cfg.epochs` epochs. Returns the model and the
/// mean training loss of every epoch.
pub fn train_network(
    architecture: Architecture,
    pairs: &[PreprocessedPair],
    table: &EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<(NeuralModel, Vec<f64>)> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if table.k() != cfg.k {
        return Err(Error::KMismatch {
            table: table.k(),
            sequence: cfg.k,
        });
    }
    let spec = NetworkSpec {
        architecture,
        input_dim: table.dim(),
        hidden: cfg.hidden,
        mlp_hidden: cfg.mlp_hidden,
        classes: cfg.task.classes(),
        pooling: cfg.pooling,
        trainable_vocab: (!cfg.freeze_embeddings).then_some(table.len()),
    };
    let network = Network::new(spec)?;
    let mut params = network.init_params(cfg.seed, table.raw_vectors())?;
    let sources: Vec<PairSources> = pairs.iter().map(|p| pair_sources(table, p)).collect::<Result<_>>()?;
    let labels: Vec<usize> = pairs.iter().map(|p| cfg.task.label(p)).collect();

    let mut adam = AdamState::new(params.len());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = epoch_order(cfg.seed, epoch, pairs.len());
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&PairSources, usize)> = chunk.iter().map(|&i| (&sources[i], labels[i])).collect();
            let (loss, mut grads) = network.batch_loss_and_grad(&params, table.raw_vectors(), &batch)?;
            let scale = 1.0 / chunk.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate);
            epoch_loss += loss;
        }
        let mean = epoch_loss / pairs.len() as f64;
        log::debug!("epoch {}: mean loss {mean:.6}", epoch + 1);
        history.push(mean);
    }
    Ok((NeuralModel { network, params }, history))
}
