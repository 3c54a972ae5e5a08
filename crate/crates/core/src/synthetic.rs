//! Generated corpora whose labels are a fixed function of pair distance.
//!
//! Every pair gets two fresh strains. The reference is a shared root with a
//! few background substitutions; the test strain copies the reference and
//! adds `d` substitutions spaced at least `k` bases apart, so the
//! deduplicated pair holds exactly `d * k` tokens per side. Both strains of a
//! pair share the same leading trim. Small `d` means protection.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqio::{build_dataset, write_fasta, HiRecord, NucleotideSequence, VirusPair, TEST_SPLIT_YEAR};

/// Substitution counts of protective pairs, with their titers.
pub const POSITIVE: [(usize, f64); 3] = [(1, 1280.0), (2, 320.0), (3, 80.0)];
/// Substitution counts of non-protective pairs.
pub const NEGATIVE: [(usize, f64); 3] = [(6, 20.0), (7, 20.0), (8, 20.0)];

const BASES: [u8; 4] = *b"ACGT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub pairs: usize,
    pub length: usize,
    pub k: usize,
    pub background: usize,
    pub max_trim: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            pairs: 500,
            length: 80,
            k: 4,
            background: 4,
            max_trim: 2,
            test_fraction: 0.2,
            seed: 17,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub sequences: Vec<NucleotideSequence>,
    pub records: Vec<HiRecord>,
    /// Substitution count between the strains of each record.
    pub distances: Vec<usize>,
}

impl SyntheticCorpus {
    pub fn fasta(&self) -> String {
        write_fasta(&self.sequences)
    }

    pub fn hi_csv(&self) -> String {
        let mut out = String::from("reference_name,test_name,hi_titer\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.reference_name, r.test_name, r.titer));
        }
        out
    }

    pub fn pairs(&self) -> Result<Vec<VirusPair>> {
        build_dataset(&self.records, &self.sequences)
    }
}

fn mutate(base: u8, rng: &mut ChaCha8Rng) -> u8 {
    let others: Vec<u8> = BASES.iter().copied().filter(|&b| b != base).collect();
    *others.choose(rng).expect("three alternatives")
}

/// `n` positions in `lo..hi`, pairwise at least `gap` apart, sorted.
fn spaced_positions(n: usize, lo: usize, hi: usize, gap: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    for _ in 0..1000 {
        let mut picked: Vec<usize> = Vec::with_capacity(n);
        for _ in 0..n {
            let candidates: Vec<usize> = (lo..hi)
                .filter(|&p| picked.iter().all(|&q| p.abs_diff(q) >= gap))
                .collect();
            match candidates.choose(rng) {
                Some(&p) => picked.push(p),
                None => break,
            }
        }
        if picked.len() == n {
            picked.sort_unstable();
            return Some(picked);
        }
    }
    None
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    let max_d = NEGATIVE.iter().map(|&(d, _)| d).max().unwrap_or(0);
    let (lo, hi) = (cfg.max_trim + cfg.k, cfg.length.saturating_sub(cfg.k));
    if cfg.k == 0 || hi <= lo || (hi - lo) < max_d * cfg.k {
        return Err(Error::Config(format!(
            "sequence length {} too short for k={} and {max_d} spaced substitutions",
            cfg.length, cfg.k
        )));
    }
    if !(0.0..=1.0).contains(&cfg.test_fraction) {
        return Err(Error::Config("test_fraction must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let root: Vec<u8> = (0..cfg.length).map(|_| *BASES.choose(&mut rng).expect("bases")).collect();
    let classes: Vec<(usize, f64)> = POSITIVE.iter().chain(&NEGATIVE).copied().collect();

    let mut corpus = SyntheticCorpus {
        sequences: Vec::with_capacity(2 * cfg.pairs),
        records: Vec::with_capacity(cfg.pairs),
        distances: Vec::with_capacity(cfg.pairs),
    };
    for i in 0..cfg.pairs {
        let (d, titer) = classes[i % classes.len()];
        let mut reference = root.clone();
        for _ in 0..cfg.background {
            let p = rng.random_range(0..cfg.length);
            reference[p] = mutate(reference[p], &mut rng);
        }
        let mut test = reference.clone();
        let sites = spaced_positions(d, lo, hi, cfg.k, &mut rng)
            .ok_or_else(|| Error::Config("could not place spaced substitutions".into()))?;
        for p in sites {
            test[p] = mutate(test[p], &mut rng);
        }
        let trim = rng.random_range(0..=cfg.max_trim);
        let held_out = rng.random_bool(cfg.test_fraction);
        let mut year = || {
            if held_out {
                rng.random_range(TEST_SPLIT_YEAR..TEST_SPLIT_YEAR + 10)
            } else {
                rng.random_range(TEST_SPLIT_YEAR - 30..TEST_SPLIT_YEAR)
            }
        };
        let (ry, ty) = (year(), year());
        let ref_name = format!("A/synthetic/r{i}/{ry}");
        let test_name = format!("A/synthetic/t{i}/{ty}");
        let text = |s: &[u8]| String::from_utf8(s[trim..].to_vec()).expect("ASCII bases");
        corpus
            .sequences
            .push(NucleotideSequence::new(&ref_name, format!("SR{i:05}"), &text(&reference))?);
        corpus
            .sequences
            .push(NucleotideSequence::new(&test_name, format!("ST{i:05}"), &text(&test))?);
        corpus.records.push(HiRecord {
            reference_name: ref_name,
            test_name,
            titer,
        });
        corpus.distances.push(d);
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::align_sequences;
    use crate::preprocess::{preprocess_pairs, PreprocessOptions};
    use crate::seqio::{parse_fasta, parse_hi_table};

    #[test]
    fn dedup_length_tracks_distance() {
        let cfg = SyntheticConfig {
            pairs: 60,
            ..Default::default()
        };
        let corpus = generate(&cfg).unwrap();
        let pairs = corpus.pairs().unwrap();
        let offsets = align_sequences(&corpus.sequences).unwrap();
        let opts = PreprocessOptions {
            k: cfg.k,
            ..Default::default()
        };
        let out = preprocess_pairs(&pairs, &offsets, &opts).unwrap();
        for (p, &d) in out.iter().zip(&corpus.distances) {
            assert_eq!(p.reference_tokens.len(), d * cfg.k, "{}", p.reference_name);
            assert_eq!(p.test_tokens.len(), d * cfg.k);
            assert_eq!(p.binary_label, u8::from(d <= 3));
        }
    }

    #[test]
    fn files_round_trip() {
        let corpus = generate(&SyntheticConfig {
            pairs: 12,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(parse_fasta(&corpus.fasta()).unwrap(), corpus.sequences);
        assert_eq!(parse_hi_table(&corpus.hi_csv()).unwrap().records, corpus.records);
        assert_eq!(corpus, generate(&SyntheticConfig { pairs: 12, ..Default::default() }).unwrap());
    }
}
