//! Cross-immunity prediction between influenza strains from paired gene
//! sequences: alignment, k-mer deduplication, embedding lookup, a siamese
//! BiLSTM classifier, statistical baselines and weighted metrics.

pub mod align;
pub mod embed;
pub mod error;
pub mod eval;
pub mod kmer;
pub mod models;
pub mod nn;
pub mod preprocess;
pub mod seqio;
pub mod synthetic;

pub use align::{align_sequences, aligned_distance, similarity, DistanceKind, OffsetMap};
pub use embed::{load_table, parse_table, random_table, EmbeddingTable, SequenceEmbedding};
pub use error::{Error, Result};
pub use eval::{confusion, weighted_metrics, ConfusionMatrix, Metrics, MetricsReport};
pub use kmer::{deduplicate_pair, segment, KmerSequence, TailPolicy};
pub use models::{
    evaluate, run_ablation, train_model, AblationReport, EmbedInit, ModelKind, Task, TrainConfig, TrainedModel,
};
pub use nn::{Operator, Pooling};
pub use preprocess::{preprocess_pairs, split_pairs, PreprocessOptions, PreprocessedPair};
pub use seqio::{build_dataset, parse_fasta, parse_hi_table, HiRecord, NucleotideSequence, Split, VirusPair};
