//! Turns labelled strain pairs into deduplicated k-mer pairs.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{similarity, DistanceKind, OffsetMap};
use crate::error::Result;
use crate::kmer::{deduplicate_pair, segment, KmerSequence, TailPolicy};
use crate::seqio::{NucleotideSequence, Split, VirusPair};

/// Default k-mer size.
pub const DEFAULT_K: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessOptions {
    pub k: usize,
    pub tail: TailPolicy,
    pub distance: DistanceKind,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            k: DEFAULT_K,
            tail: TailPolicy::Keep,
            distance: DistanceKind::OverhangHamming,
        }
    }
}

/// One line of a preprocessed pair file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessedPair {
    pub reference_name: String,
    pub test_name: String,
    pub k: usize,
    pub reference_tokens: Vec<String>,
    pub test_tokens: Vec<String>,
    /// Length-normalized aligned distance of the raw sequences.
    pub similarity: f64,
    pub titer: f64,
    pub binary_label: u8,
    pub level_label: u8,
    pub split: Split,
}

impl PreprocessedPair {
    pub fn reference_kmers(&self) -> KmerSequence {
        KmerSequence {
            strain_name: self.reference_name.clone(),
            tokens: self.reference_tokens.clone(),
            k: self.k,
        }
    }

    pub fn test_kmers(&self) -> KmerSequence {
        KmerSequence {
            strain_name: self.test_name.clone(),
            tokens: self.test_tokens.clone(),
            k: self.k,
        }
    }
}

/// Segments, deduplicates and scores one strain pair.
pub fn preprocess_strains(
    r: &NucleotideSequence,
    t: &NucleotideSequence,
    offsets: &OffsetMap,
    opts: &PreprocessOptions,
) -> Result<(KmerSequence, KmerSequence, f64)> {
    let (rk, tk) = (segment(r, opts.k)?, segment(t, opts.k)?);
    let (rd, td) = deduplicate_pair(&rk, &tk, offsets, opts.tail)?;
    let sim = similarity(r, t, offsets, opts.distance)?;
    Ok((rd, td, sim))
}

/// Preprocesses every pair, preserving input order.
pub fn preprocess_pairs(
    pairs: &[VirusPair],
    offsets: &OffsetMap,
    opts: &PreprocessOptions,
) -> Result<Vec<PreprocessedPair>> {
    // strains recur across many pairs; segment each once
    let mut strains: HashMap<&str, &NucleotideSequence> = HashMap::new();
    for p in pairs {
        strains.insert(&p.reference.name, &p.reference);
        strains.insert(&p.test.name, &p.test);
    }
    let segmented: HashMap<&str, KmerSequence> = strains
        .par_iter()
        .map(|(name, seq)| segment(seq, opts.k).map(|s| (*name, s)))
        .collect::<Result<_>>()?;

    pairs
        .par_iter()
        .map(|p| {
            let rk = &segmented[p.reference.name.as_str()];
            let tk = &segmented[p.test.name.as_str()];
            let (rd, td) = deduplicate_pair(rk, tk, offsets, opts.tail)?;
            Ok(PreprocessedPair {
                reference_name: p.reference.name.clone(),
                test_name: p.test.name.clone(),
                k: opts.k,
                reference_tokens: rd.tokens,
                test_tokens: td.tokens,
                similarity: similarity(&p.reference, &p.test, offsets, opts.distance)?,
                titer: p.titer,
                binary_label: p.binary_label,
                level_label: p.level_label,
                split: p.split,
            })
        })
        .collect()
}

/// Partitions pairs into (train, test) by their temporal split, keeping order.
pub fn split_pairs(pairs: Vec<PreprocessedPair>) -> (Vec<PreprocessedPair>, Vec<PreprocessedPair>) {
    pairs.into_iter().partition(|p| p.split == Split::Train)
}
