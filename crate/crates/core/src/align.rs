//! Template-based sliding-offset alignment and the aligned distance used by
//! the similarity baselines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqio::NucleotideSequence;

/// Start offset of every strain on the template's coordinate axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetMap {
    pub template_name: String,
    pub offsets: BTreeMap<String, usize>,
}

impl OffsetMap {
    pub fn get(&self, name: &str) -> Result<usize> {
        self.offsets
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownStrain(name.to_string()))
    }
}

/// Number of positions `j < min(|a|, |b|)` with `a[j] == b[j]`.
pub fn common_sites_length(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x == y).count()
}

/// Best start of `seq` within `template`, scanning every offset in
/// `0..=len(template) - len(seq)`. Ties go to the largest offset. Returns
/// `None` when `seq` is longer than the template.
pub fn find_start_position(seq: &[u8], template: &[u8]) -> Option<usize> {
    let span = template.len().checked_sub(seq.len())?;
    let mut best = 0;
    let mut best_offset = 0;
    for i in 0..=span {
        let c = common_sites_length(seq, &template[i..]);
        if best <= c {
            best = c;
            best_offset = i;
        }
    }
    Some(best_offset)
}

/// Aligns every sequence against the longest one (first in input order on
/// ties).
pub fn align_sequences(seqs: &[NucleotideSequence]) -> Result<OffsetMap> {
    let template = seqs
        .iter()
        .reduce(|best, s| if s.len() > best.len() { s } else { best })
        .ok_or(Error::Empty("no sequences to align"))?;
    let offsets = seqs
        .iter()
        .map(|s| {
            let d = find_start_position(s.bases.as_bytes(), template.bases.as_bytes())
                .expect("template is the longest sequence");
            (s.name.clone(), d)
        })
        .collect();
    Ok(OffsetMap {
        template_name: template.name.clone(),
        offsets,
    })
}

/// How positional differences between two placed strains are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Overlap mismatches plus every position covered by only one strain.
    #[default]
    OverhangHamming,
    /// Overlap mismatches only.
    OverlapHamming,
}

impl DistanceKind {
    /// Distance between `r` placed at `r_off` and `t` placed at `t_off`.
    pub fn distance(self, r: &[u8], r_off: usize, t: &[u8], t_off: usize) -> usize {
        let start = r_off.max(t_off);
        let end = (r_off + r.len()).min(t_off + t.len());
        let overlap = end.saturating_sub(start);
        let mismatches = if overlap == 0 {
            0
        } else {
            let a = &r[start - r_off..end - r_off];
            let b = &t[start - t_off..end - t_off];
            a.iter().zip(b).filter(|(x, y)| x != y).count()
        };
        match self {
            DistanceKind::OverhangHamming => mismatches + (r.len() + t.len() - 2 * overlap),
            DistanceKind::OverlapHamming => mismatches,
        }
    }
}

pub fn aligned_distance(
    r: &NucleotideSequence,
    t: &NucleotideSequence,
    offsets: &OffsetMap,
    kind: DistanceKind,
) -> Result<usize> {
    let (ro, to) = (offsets.get(&r.name)?, offsets.get(&t.name)?);
    Ok(kind.distance(r.bases.as_bytes(), ro, t.bases.as_bytes(), to))
}

/// Length-normalized aligned distance `d / ((L_R + L_T) / 2)`. Larger values
/// mean the strains are further apart.
pub fn similarity(
    r: &NucleotideSequence,
    t: &NucleotideSequence,
    offsets: &OffsetMap,
    kind: DistanceKind,
) -> Result<f64> {
    let d = aligned_distance(r, t, offsets, kind)?;
    let mean_len = (r.len() + t.len()) as f64 / 2.0;
    if mean_len == 0.0 {
        return Err(Error::Empty("both sequences are empty"));
    }
    Ok(d as f64 / mean_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(name: &str, bases: &str) -> NucleotideSequence {
        NucleotideSequence::new(name, "x", bases).unwrap()
    }

    fn brute_force_offset(s: &[u8], template: &[u8]) -> usize {
        let scores: Vec<usize> = (0..=template.len() - s.len())
            .map(|i| (0..s.len()).filter(|&j| s[j] == template[i + j]).count())
            .collect();
        let best = *scores.iter().max().unwrap();
        scores.iter().rposition(|&c| c == best).unwrap()
    }

    #[test]
    fn common_sites() {
        assert_eq!(common_sites_length(b"ACGT", b"ACGT"), 4);
        assert_eq!(common_sites_length(b"ACGT", b"AGGT"), 3);
        assert_eq!(common_sites_length(b"AC", b""), 0);
    }

    #[test]
    fn offsets_match_examples() {
        let template = seq("t", "ACGTACGT");
        let s = seq("s", "GTAC");
        let map = align_sequences(&[template.clone(), s]).unwrap();
        assert_eq!(map.template_name, "t");
        assert_eq!(map.get("s").unwrap(), 2);
        assert_eq!(map.get("t").unwrap(), 0);

        let map = align_sequences(&[seq("a", "AAAA"), seq("b", "AAAAAA")]).unwrap();
        assert_eq!(map.template_name, "b");
        assert_eq!(map.get("a").unwrap(), 2);
    }

    #[test]
    fn template_ties_take_first() {
        let map = align_sequences(&[seq("a", "ACGT"), seq("b", "TTTT")]).unwrap();
        assert_eq!(map.template_name, "a");
        assert!(align_sequences(&[]).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = seq("a", "AAAA");
        let b = seq("b", "AAAT");
        let c = seq("c", "AAAAAA");
        let map = OffsetMap {
            template_name: "c".into(),
            offsets: [("a", 0), ("b", 0), ("c", 0)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        };
        let kind = DistanceKind::OverhangHamming;
        assert_eq!(aligned_distance(&a, &a, &map, kind).unwrap(), 0);
        assert_eq!(aligned_distance(&a, &b, &map, kind).unwrap(), 1);
        assert_eq!(aligned_distance(&a, &c, &map, kind).unwrap(), 2);
        assert_eq!(similarity(&a, &a, &map, kind).unwrap(), 0.0);
        assert_eq!(similarity(&a, &b, &map, kind).unwrap(), 0.25);
        assert_eq!(similarity(&a, &c, &map, kind).unwrap(), 0.4);
        assert_eq!(aligned_distance(&a, &c, &map, DistanceKind::OverlapHamming).unwrap(), 0);
        assert!(matches!(
            aligned_distance(&a, &seq("z", "A"), &map, kind),
            Err(Error::UnknownStrain(n)) if n == "z"
        ));
    }

    #[test]
    fn disjoint_placement_counts_everything() {
        assert_eq!(DistanceKind::OverhangHamming.distance(b"AC", 0, b"GT", 5), 4);
        assert_eq!(DistanceKind::OverlapHamming.distance(b"AC", 0, b"GT", 5), 0);
    }

    fn dna(max: usize) -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(prop::sample::select(b"ACGT".to_vec()), 1..=max)
    }

    proptest! {
        #[test]
        fn offset_is_optimal(a in dna(64), b in dna(64)) {
            let (s, t) = if a.len() <= b.len() { (a, b) } else { (b, a) };
            let d = find_start_position(&s, &t).unwrap();
            prop_assert_eq!(d, brute_force_offset(&s, &t));
        }

        #[test]
        fn distance_symmetric_and_bounded(
            a in dna(40), b in dna(40), ao in 0usize..10, bo in 0usize..10
        ) {
            for kind in [DistanceKind::OverhangHamming, DistanceKind::OverlapHamming] {
                let d1 = kind.distance(&a, ao, &b, bo);
                let d2 = kind.distance(&b, bo, &a, ao);
                prop_assert_eq!(d1, d2);
                let sim = d1 as f64 / ((a.len() + b.len()) as f64 / 2.0);
                prop_assert!((0.0..=2.0).contains(&sim));
                prop_assert_eq!(kind.distance(&a, ao, &a, ao), 0);
            }
        }
    }
}
