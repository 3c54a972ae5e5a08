//! Static k-mer embedding tables and sequence embedding with
//! neighbour-averaged out-of-vocabulary tokens.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read_to_string, Error, Result};
use crate::kmer::KmerSequence;

/// Neighbours considered on each side of an unknown token.
pub const OOV_WINDOW: usize = 2;

/// Half-width of the uniform range used by [`random_table`].
pub const RANDOM_INIT_RANGE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TableSource {
    Pretrained,
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    k: usize,
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    source: TableSource,
}

impl EmbeddingTable {
    pub fn new(k: usize, dim: usize, source: TableSource) -> Self {
        EmbeddingTable {
            k,
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            source,
        }
    }

    /// Adds a token. Tokens must be uppercase `ACGT` of length k.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Format(format!(
                "token {token}: vector has {} values, expected dim={}",
                vector.len(),
                self.dim
            )));
        }
        if token.len() != self.k || !token.bytes().all(|b| b"ACGT".contains(&b)) {
            return Err(Error::Format(format!(
                "token '{token}' is not an uppercase ACGT k-mer of length {}",
                self.k
            )));
        }
        if self.index.contains_key(token) {
            return Err(Error::Format(format!("duplicate token {token}")));
        }
        self.index.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        self.vectors.extend_from_slice(vector);
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn source(&self) -> TableSource {
        self.source
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.id(token).map(|i| self.vector(i))
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        &self.vectors[id * self.dim..(id + 1) * self.dim]
    }

    /// All vectors, row-major in token-id order.
    pub fn raw_vectors(&self) -> &[f64] {
        &self.vectors
    }

    /// SHA-256 over k, dim, tokens and the exact vector bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.k as u64).to_le_bytes());
        h.update((self.dim as u64).to_le_bytes());
        for (i, tok) in self.tokens.iter().enumerate() {
            h.update(tok.as_bytes());
            for v in self.vector(i) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Serializes to the TSV interchange format.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("k={}\tdim={}\tcount={}\n", self.k, self.dim, self.len());
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(tok);
            out.push('\t');
            for (j, v) in self.vector(i).iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn header_field(field: Option<&str>, key: &str) -> Result<usize> {
    field
        .and_then(|f| f.strip_prefix(key))
        .and_then(|f| f.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("embedding header must be 'k=<K> dim=<D> count=<N>', bad '{key}'")))
}

/// Parses the TSV table format: a `k=<K> dim=<D> count=<N>` header line
/// followed by N lines `TOKEN<TAB>v1 v2 ... vD`.
pub fn parse_table(text: &str) -> Result<EmbeddingTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(Error::Empty("embedding table"))?;
    let mut fields = header.split_whitespace();
    let k = header_field(fields.next(), "k")?;
    let dim = header_field(fields.next(), "dim")?;
    let count = header_field(fields.next(), "count")?;
    if k == 0 || dim == 0 {
        return Err(Error::Format("k and dim must be positive".into()));
    }

    let mut table = EmbeddingTable::new(k, dim, TableSource::Pretrained);
    table.vectors.reserve(count * dim);
    let mut values = Vec::with_capacity(dim);
    for line in lines {
        let (token, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("row '{line}' lacks a tab separator")))?;
        let token = token.trim();
        values.clear();
        for v in rest.split_whitespace() {
            values.push(
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("token {token}: bad value '{v}'")))?,
            );
        }
        table.insert(token, &values)?;
    }
    if table.len() != count {
        return Err(Error::Format(format!(
            "header declares count={count} but {} rows were read",
            table.len()
        )));
    }
    Ok(table)
}

pub fn load_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    parse_table(&read_to_string(path)?)
}

/// Table over all `4^k` canonical k-mers with i.i.d. uniform values in
/// `[-0.05, 0.05]`.
pub fn random_table(k: usize, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(k, dim, TableSource::Random { seed });
    let mut buf = vec![0.0; dim];
    for token in canonical_kmers(k) {
        for v in buf.iter_mut() {
            *v = rng.random_range(-RANDOM_INIT_RANGE..=RANDOM_INIT_RANGE);
        }
        table.insert(&token, &buf).expect("canonical k-mers are valid");
    }
    table
}

/// All `ACGT` strings of length k in lexicographic order.
pub fn canonical_kmers(k: usize) -> impl Iterator<Item = String> {
    const BASES: [char; 4] = ['A', 'C', 'G', 'T'];
    (0..4usize.pow(k as u32)).map(move |mut code| {
        let mut tok = vec!['A'; k];
        for slot in tok.iter_mut().rev() {
            *slot = BASES[code % 4];
            code /= 4;
        }
        tok.into_iter().collect()
    })
}

/// Table rows combined into one sequence row: `sum(weight * table[id])`.
pub type RowSource = Vec<(usize, f64)>;

/// Resolves each token to the table rows it is built from. Known tokens map
/// to themselves; an unknown token averages its known neighbours within
/// [`OOV_WINDOW`] positions on either side, or is empty (the zero vector)
/// when there are none.
pub fn row_sources(table: &EmbeddingTable, seq: &KmerSequence) -> Result<Vec<RowSource>> {
    if seq.k != table.k {
        return Err(Error::KMismatch {
            table: table.k,
            sequence: seq.k,
        });
    }
    let ids: Vec<Option<usize>> = seq.tokens.iter().map(|t| table.id(t)).collect();
    let sources = (0..ids.len())
        .map(|i| match ids[i] {
            Some(id) => vec![(id, 1.0)],
            None => {
                let lo = i.saturating_sub(OOV_WINDOW);
                let hi = (i + OOV_WINDOW).min(ids.len() - 1);
                let known: Vec<usize> = (lo..=hi).filter(|&j| j != i).filter_map(|j| ids[j]).collect();
                let w = 1.0 / known.len() as f64;
                known.into_iter().map(|id| (id, w)).collect()
            }
        })
        .collect();
    Ok(sources)
}

/// A sequence of dense rows, one per token.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceEmbedding {
    data: Vec<f64>,
    dim: usize,
}

impl SequenceEmbedding {
    pub fn new(dim: usize) -> Self {
        SequenceEmbedding { data: Vec::new(), dim }
    }

    pub fn from_rows(rows: &[Vec<f64>], dim: usize) -> Result<Self> {
        let mut e = SequenceEmbedding::new(dim);
        for r in rows {
            e.push(r)?;
        }
        Ok(e)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Dimension {
                what: "embedding row",
                expected: self.dim,
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// Appends all rows of `other`.
    pub fn extend(&mut self, other: &SequenceEmbedding) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::Dimension {
                what: "embedding row",
                expected: self.dim,
                got: other.dim,
            });
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub(crate) fn from_flat(data: Vec<f64>, dim: usize) -> Self {
        debug_assert_eq!(data.len() % dim, 0);
        SequenceEmbedding { data, dim }
    }
}

/// Materializes row sources against a flat row-major matrix of `dim`-vectors.
pub fn materialize(sources: &[RowSource], vectors: &[f64], dim: usize) -> SequenceEmbedding {
    let mut data = vec![0.0; sources.len() * dim];
    for (row, src) in data.chunks_exact_mut(dim).zip(sources) {
        for &(id, w) in src {
            for (o, v) in row.iter_mut().zip(&vectors[id * dim..(id + 1) * dim]) {
                *o += w * v;
            }
        }
    }
    SequenceEmbedding::from_flat(data, dim)
}

pub fn embed_sequence(table: &EmbeddingTable, seq: &KmerSequence) -> Result<SequenceEmbedding> {
    let sources = row_sources(table, seq)?;
    Ok(materialize(&sources, &table.vectors, table.dim))
}

/// Element-wise mean of the rows; zero vector for an empty sequence.
pub fn gse_pool(e: &SequenceEmbedding) -> Vec<f64> {
    let mut out = vec![0.0; e.dim];
    if e.is_empty() {
        return out;
    }
    for row in e.rows() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let n = e.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kseq(tokens: &[&str], k: usize) -> KmerSequence {
        KmerSequence {
            strain_name: "s".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            k,
        }
    }

    #[test]
    fn load_small_table() {
        let t = parse_table("k=2 dim=4 count=2\nAC\t1 2 3 4\nGT\t0.5 -1 0 1e-3\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("GT").unwrap(), [0.5, -1.0, 0.0, 1e-3]);
        let t = parse_table("k=2\tdim=4\tcount=1\nAC\t1 2 3 4\n").unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn load_errors() {
        let err = parse_table("k=2 dim=4 count=1\nAC\t1 2 3\n").unwrap_err();
        assert!(err.to_string().contains("AC"), "{err}");
        let err = parse_table("k=2 dim=1 count=2\nAC\t1\nAC\t2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(parse_table("k=2 dim=1 count=2\nAC\t1\n").is_err());
        assert!(parse_table("k=2 dim=1\nAC\t1\n").is_err());
        assert!(parse_table("k=2 dim=1 count=1\nAN\t1\n").is_err());
    }

    #[test]
    fn tsv_roundtrip_exact() {
        let t = random_table(3, 5, 11);
        let back = parse_table(&t.to_tsv()).unwrap();
        assert_eq!(back.raw_vectors(), t.raw_vectors());
        assert_eq!(back.tokens(), t.tokens());
        assert_eq!(back.fingerprint(), t.fingerprint());
    }

    #[test]
    fn random_tables() {
        let t = random_table(2, 3, 7);
        assert_eq!(t.len(), 16);
        assert!(t.raw_vectors().iter().all(|v| v.abs() <= RANDOM_INIT_RANGE));
        assert_eq!(t, random_table(2, 3, 7));
        assert_ne!(t.raw_vectors(), random_table(2, 3, 8).raw_vectors());
        assert_eq!(t.tokens()[0], "AA");
        assert_eq!(t.tokens()[15], "TT");
    }

    fn four_neighbour_table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2, 2, TableSource::Pretrained);
        t.insert("AA", &[1.0, 0.0]).unwrap();
        t.insert("AC", &[0.0, 1.0]).unwrap();
        t.insert("AG", &[1.0, 1.0]).unwrap();
        t.insert("AT", &[2.0, 0.0]).unwrap();
        t
    }

    #[test]
    fn oov_neighbour_mean() {
        let t = four_neighbour_table();
        let e = embed_sequence(&t, &kseq(&["AA", "AC", "NN", "AG", "AT"], 2)).unwrap();
        assert_eq!(e.row(2), [1.0, 0.5]);
        assert_eq!(e.row(0), [1.0, 0.0]);
        assert_eq!(e.row(4), [2.0, 0.0]);
    }

    #[test]
    fn oov_fallbacks() {
        let t = four_neighbour_table();
        let e = embed_sequence(&t, &kseq(&["NN"], 2)).unwrap();
        assert_eq!(e.row(0), [0.0, 0.0]);
        // unknown neighbours are excluded, not resolved
        let e = embed_sequence(&t, &kseq(&["AC", "NA", "NN"], 2)).unwrap();
        assert_eq!(e.row(2), [0.0, 1.0]);
        assert!(matches!(
            embed_sequence(&t, &kseq(&["AAA"], 3)),
            Err(Error::KMismatch { table: 2, sequence: 3 })
        ));
    }

    #[test]
    fn pooling() {
        let e = SequenceEmbedding::from_rows(&[vec![3.0, -1.0]], 2).unwrap();
        assert_eq!(gse_pool(&e), [3.0, -1.0]);
        let e = SequenceEmbedding::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]], 2).unwrap();
        assert_eq!(gse_pool(&e), [1.0, 1.0]);
        assert_eq!(gse_pool(&SequenceEmbedding::new(3)), [0.0; 3]);
    }

    fn token() -> impl Strategy<Value = String> {
        "[ACGTN]{2}"
    }

    proptest! {
        #[test]
        fn oov_locality(tokens in proptest::collection::vec(token(), 1..12), j in 0usize..12, repl in token()) {
            let table = random_table(2, 3, 1);
            let j = j % tokens.len();
            let mut changed = tokens.clone();
            changed[j] = repl;
            let to_seq = |t: &Vec<String>| KmerSequence { strain_name: "s".into(), tokens: t.clone(), k: 2 };
            let a = embed_sequence(&table, &to_seq(&tokens)).unwrap();
            let b = embed_sequence(&table, &to_seq(&changed)).unwrap();
            for i in 0..tokens.len() {
                if i + OOV_WINDOW < j || i > j + OOV_WINDOW {
                    prop_assert_eq!(a.row(i), b.row(i));
                }
            }
            prop_assert_eq!(a, embed_sequence(&table, &to_seq(&tokens)).unwrap());
        }

        #[test]
        fn pool_of_doubled_sequence(rows in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 1..8)) {
            let e = SequenceEmbedding::from_rows(&rows, 3).unwrap();
            let mut doubled = e.clone();
            doubled.extend(&e).unwrap();
            let (a, b) = (gse_pool(&e), gse_pool(&doubled));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
