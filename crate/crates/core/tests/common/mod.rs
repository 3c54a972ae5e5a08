#![allow(dead_code)]

use dpcipi::embed::RowSource;
use dpcipi::models::{ModelKind, TrainConfig};
use dpcipi::nn::{Architecture, Network, NetworkSpec, Operator, PairSources, Pooling};
use dpcipi::synthetic::{generate, SyntheticConfig};
use dpcipi::{align_sequences, preprocess_pairs, random_table, split_pairs, EmbeddingTable, PreprocessOptions, PreprocessedPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SYNTH_DIM: usize = 8;
pub const SYNTH_HIDDEN: usize = 16;
pub const SYNTH_TABLE_SEED: u64 = 3;

pub struct SyntheticSplit {
    pub train: Vec<PreprocessedPair>,
    pub test: Vec<PreprocessedPair>,
    pub table: EmbeddingTable,
    pub config: SyntheticConfig,
}

pub fn synthetic_split(cfg: SyntheticConfig) -> SyntheticSplit {
    let corpus = generate(&cfg).unwrap();
    let pairs = corpus.pairs().unwrap();
    let offsets = align_sequences(&corpus.sequences).unwrap();
    let opts = PreprocessOptions {
        k: cfg.k,
        ..Default::default()
    };
    let (train, test) = split_pairs(preprocess_pairs(&pairs, &offsets, &opts).unwrap());
    SyntheticSplit {
        train,
        test,
        table: random_table(cfg.k, SYNTH_DIM, SYNTH_TABLE_SEED),
        config: cfg,
    }
}

/// Training settings for the synthetic corpus: default schedule, small widths.
pub fn synthetic_train_config(k: usize) -> TrainConfig {
    TrainConfig {
        k,
        hidden: SYNTH_HIDDEN,
        mlp_hidden: SYNTH_HIDDEN,
        ..Default::default()
    }
}

pub fn is_neural(kind: ModelKind) -> bool {
    matches!(kind, ModelKind::Dpcipi | ModelKind::BilstmConcat | ModelKind::NnGse)
}

/// A small random network, table and pair for gradient checking.
pub struct TinyCase {
    pub network: Network,
    pub params: Vec<f64>,
    pub table: Vec<f64>,
    pub pair: PairSources,
    pub label: usize,
}

pub fn tiny_case(seed: u64, architecture: Architecture, trainable: bool) -> TinyCase {
    const DIM: usize = 6;
    const VOCAB: usize = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = if rng.random_bool(0.5) { 2 } else { 4 };
    let spec = NetworkSpec {
        architecture,
        input_dim: DIM,
        hidden: 4,
        mlp_hidden: 5,
        classes,
        pooling: if rng.random_bool(0.5) { Pooling::Final } else { Pooling::Mean },
        trainable_vocab: trainable.then_some(VOCAB),
    };
    let network = Network::new(spec).unwrap();
    let params: Vec<f64> = (0..network.num_params()).map(|_| rng.random_range(-0.6..0.6)).collect();
    let table: Vec<f64> = (0..VOCAB * DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let sequence = |rng: &mut ChaCha8Rng| -> Vec<RowSource> {
        let len = rng.random_range(1..=5);
        (0..len)
            .map(|_| {
                if rng.random_bool(0.2) {
                    // an averaged out-of-vocabulary row
                    vec![(rng.random_range(0..VOCAB), 0.5), (rng.random_range(0..VOCAB), 0.5)]
                } else {
                    vec![(rng.random_range(0..VOCAB), 1.0)]
                }
            })
            .collect()
    };
    let pair = PairSources {
        reference: sequence(&mut rng),
        test: sequence(&mut rng),
    };
    let label = rng.random_range(0..classes);
    TinyCase {
        network,
        params,
        table,
        pair,
        label,
    }
}

pub fn siamese_mii() -> Architecture {
    Architecture::Siamese {
        operator: Operator::Mii,
    }
}

/// Central finite differences of the loss with respect to every parameter.
pub fn numeric_gradient(case: &TinyCase, eps: f64) -> Vec<f64> {
    let loss = |p: &[f64]| {
        case.network
            .batch_loss(p, &case.table, &[(&case.pair, case.label)])
            .unwrap()
    };
    let mut p = case.params.clone();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = loss(&p);
            p[i] = orig - eps;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

pub fn analytic_gradient(case: &TinyCase) -> Vec<f64> {
    let mut g = vec![0.0; case.params.len()];
    case.network
        .loss_and_grad(&case.params, &case.table, &case.pair, case.label, &mut g)
        .unwrap();
    g
}

/// Denominator floor for the relative error, so that entries whose true
/// gradient is at the level of finite-difference noise are compared in
/// absolute terms.
pub const REL_FLOOR: f64 = 1e-7;

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Largest relative error and the name of the tensor it occurs in.
pub fn max_relative_error(case: &TinyCase, eps: f64) -> (f64, String) {
    let a = analytic_gradient(case);
    let n = numeric_gradient(case, eps);
    let mut worst = (0.0, String::new());
    for entry in case.network.layout().entries() {
        for i in entry.range() {
            let e = relative_error(a[i], n[i]);
            if e > worst.0 {
                worst = (e, entry.name.clone());
            }
        }
    }
    worst
}
