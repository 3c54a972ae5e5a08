//! k-mer segmentation and same-locus deduplication of strain pairs.

use serde::{Deserialize, Serialize};

use crate::align::OffsetMap;
use crate::error::{Error, Result};
use crate::seqio::NucleotideSequence;

pub const PAD_CHAR: char = '#';

/// The padding token for a given k (`k` copies of `#`).
pub fn pad_token(k: usize) -> String {
    std::iter::repeat_n(PAD_CHAR, k).collect()
}

pub fn is_pad(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c == PAD_CHAR)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmerSequence {
    pub strain_name: String,
    pub tokens: Vec<String>,
    pub k: usize,
}

impl KmerSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Overlapping windows of length `k`, one per start position.
pub fn segment(seq: &NucleotideSequence, k: usize) -> Result<KmerSequence> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if seq.len() < k {
        return Err(Error::TooShort {
            name: seq.name.clone(),
            len: seq.len(),
            k,
        });
    }
    let tokens = seq
        .bases
        .as_bytes()
        .windows(k)
        .map(|w| String::from_utf8(w.to_vec()).expect("bases are ASCII"))
        .collect();
    Ok(KmerSequence {
        strain_name: seq.name.clone(),
        tokens,
        k,
    })
}

/// What happens to tokens past the shorter of the two padded sequences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    #[default]
    Keep,
    Truncate,
}

/// Left-pads each token list with one padding token per offset position.
pub fn align_and_fill_pair(
    r: &KmerSequence,
    t: &KmerSequence,
    offsets: &OffsetMap,
) -> Result<(Vec<String>, Vec<String>)> {
    let fill = |s: &KmerSequence| -> Result<Vec<String>> {
        let d = offsets.get(&s.strain_name)?;
        let pad = pad_token(s.k);
        let mut out = Vec::with_capacity(d + s.tokens.len());
        out.extend(std::iter::repeat_n(pad, d));
        out.extend(s.tokens.iter().cloned());
        Ok(out)
    };
    Ok((fill(r)?, fill(t)?))
}

/// Removes every k-mer that both strains share at the same aligned locus,
/// then strips padding.
pub fn deduplicate_pair(
    r: &KmerSequence,
    t: &KmerSequence,
    offsets: &OffsetMap,
    tail: TailPolicy,
) -> Result<(KmerSequence, KmerSequence)> {
    let (m, n) = align_and_fill_pair(r, t, offsets)?;
    let (keep_m, keep_n) = dedup_padded(&m, &n, tail);
    Ok((
        KmerSequence {
            strain_name: r.strain_name.clone(),
            tokens: keep_m,
            k: r.k,
        },
        KmerSequence {
            strain_name: t.strain_name.clone(),
            tokens: keep_n,
            k: t.k,
        },
    ))
}

/// Deduplication on already padded token lists.
pub fn dedup_padded(m: &[String], n: &[String], tail: TailPolicy) -> (Vec<String>, Vec<String>) {
    let l = m.len().min(n.len());
    let common: Vec<bool> = (0..l).map(|i| m[i] == n[i]).collect();
    let survivors = |seq: &[String]| -> Vec<String> {
        let limit = match tail {
            TailPolicy::Keep => seq.len(),
            TailPolicy::Truncate => l,
        };
        seq[..limit]
            .iter()
            .enumerate()
            .filter(|(i, tok)| !(*i < l && common[*i]) && !is_pad(tok))
            .map(|(_, tok)| tok.clone())
            .collect()
    };
    (survivors(m), survivors(n))
}
