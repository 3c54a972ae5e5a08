//! Strain sequences, HI titer records and the labelled pair dataset.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nucleotide alphabet accepted in sequence bodies (after uppercasing).
pub const ALPHABET: [u8; 5] = *b"ACGTN";

/// Binary cross-protection threshold on the HI titer.
pub const PROTECTIVE_TITER: f64 = 40.0;

/// Largest titer accepted by the dilution series.
pub const MAX_TITER: f64 = 10240.0;

/// Lower edges of the four titer levels `[0,40) [40,100) [100,1000) [1000,10240]`.
pub const LEVEL_EDGES: [f64; 4] = [0.0, 40.0, 100.0, 1000.0];

/// First year assigned to the held-out split.
pub const TEST_SPLIT_YEAR: i32 = 1995;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NucleotideSequence {
    pub name: String,
    pub accession: String,
    pub bases: String,
}

impl NucleotideSequence {
    /// Builds a record, uppercasing and validating the bases.
    pub fn new(name: impl Into<String>, accession: impl Into<String>, bases: &str) -> Result<Self> {
        let name = name.into();
        let bases = normalize_bases(&name, bases, 0)?;
        if bases.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("sequence '{name}' is empty"),
            });
        }
        Ok(NucleotideSequence {
            name,
            accession: accession.into(),
            bases,
        })
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }
}

fn normalize_bases(name: &str, raw: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(raw.len());
    for ch in raw.chars() {
        if ch.is_whitespace() {
            continue;
        }
        let up = ch.to_ascii_uppercase();
        if !up.is_ascii() || !ALPHABET.contains(&(up as u8)) {
            return Err(Error::InvalidBase {
                line,
                name: name.to_string(),
                ch,
            });
        }
        out.push(up);
    }
    Ok(out)
}

/// Parses FASTA text whose headers have the form `>name|accession`.
pub fn parse_fasta(text: &str) -> Result<Vec<NucleotideSequence>> {
    struct Pending {
        name: String,
        accession: String,
        header_line: usize,
        bases: String,
    }

    fn finish(p: Pending, out: &mut Vec<NucleotideSequence>, seen: &mut BTreeSet<String>) -> Result<()> {
        if p.bases.is_empty() {
            return Err(Error::Parse {
                line: p.header_line,
                msg: format!("sequence '{}' has an empty body", p.name),
            });
        }
        if !seen.insert(p.name.clone()) {
            return Err(Error::Parse {
                line: p.header_line,
                msg: format!("duplicate strain name '{}'", p.name),
            });
        }
        out.push(NucleotideSequence {
            name: p.name,
            accession: p.accession,
            bases: p.bases,
        });
        Ok(())
    }

    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut current: Option<Pending> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            if let Some(p) = current.take() {
                finish(p, &mut out, &mut seen)?;
            }
            let (name, accession) = header.split_once('|').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("malformed header '{line}', expected '>name|accession'"),
            })?;
            let (name, accession) = (name.trim(), accession.trim());
            if name.is_empty() || accession.is_empty() || accession.contains('|') {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("malformed header '{line}', expected '>name|accession'"),
                });
            }
            current = Some(Pending {
                name: name.to_string(),
                accession: accession.to_string(),
                header_line: line_no,
                bases: String::new(),
            });
        } else {
            let p = current.as_mut().ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "sequence data before the first header".to_string(),
            })?;
            let chunk = normalize_bases(&p.name, line, line_no)?;
            p.bases.push_str(&chunk);
        }
    }
    if let Some(p) = current.take() {
        finish(p, &mut out, &mut seen)?;
    }
    Ok(out)
}

/// Serializes records as FASTA, wrapping bodies at 70 columns.
pub fn write_fasta(records: &[NucleotideSequence]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, ">{}|{}", r.name, r.accession);
        for chunk in r.bases.as_bytes().chunks(70) {
            out.push_str(std::str::from_utf8(chunk).expect("bases are ASCII"));
            out.push('\n');
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiRecord {
    pub reference_name: String,
    pub test_name: String,
    pub titer: f64,
}

/// Parsed HI table plus the number of rows dropped for a missing titer.
#[derive(Clone, Debug, PartialEq)]
pub struct HiTable {
    pub records: Vec<HiRecord>,
    pub skipped: usize,
}

/// Parses a CSV with header `reference_name,test_name,hi_titer`.
///
/// Row indices in errors count data rows from 1.
pub fn parse_hi_table(text: &str) -> Result<HiTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("cannot read HI table header: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("HI table is missing column '{name}'")))
    };
    let ref_col = column("reference_name")?;
    let test_col = column("test_name")?;
    let titer_col = column("hi_titer")?;

    let mut records = Vec::new();
    let mut skipped = 0;
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 1;
        let row = row.map_err(|e| Error::Row {
            row: row_no,
            msg: e.to_string(),
        })?;
        let field = |col: usize| row.get(col).unwrap_or("");
        let (reference, test, titer) = (field(ref_col), field(test_col), field(titer_col));
        if titer.is_empty() {
            skipped += 1;
            continue;
        }
        if reference.is_empty() || test.is_empty() {
            return Err(Error::Row {
                row: row_no,
                msg: "missing strain name".to_string(),
            });
        }
        let value: f64 = titer.parse().map_err(|_| Error::Row {
            row: row_no,
            msg: format!("non-numeric titer '{titer}'"),
        })?;
        if !(value > 0.0 && value <= MAX_TITER) {
            return Err(Error::Row {
                row: row_no,
                msg: format!("titer {titer} outside (0, {MAX_TITER}]"),
            });
        }
        records.push(HiRecord {
            reference_name: reference.to_string(),
            test_name: test.to_string(),
            titer: value,
        });
    }
    Ok(HiTable { records, skipped })
}

/// Extracts the isolation year from the last `/`-delimited field of a strain
/// name. Two-digit years are placed in the 1900s.
pub fn strain_year(name: &str) -> Result<i32> {
    let last = name.rsplit('/').next().unwrap_or("").trim();
    if !name.contains('/') || !last.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Year(name.to_string()));
    }
    match last.len() {
        4 => last.parse().map_err(|_| Error::Year(name.to_string())),
        2 => last
            .parse::<i32>()
            .map(|yy| 1900 + yy)
            .map_err(|_| Error::Year(name.to_string())),
        _ => Err(Error::Year(name.to_string())),
    }
}

pub fn binary_label(titer: f64) -> u8 {
    u8::from(titer >= PROTECTIVE_TITER)
}

pub fn level_label(titer: f64) -> u8 {
    LEVEL_EDGES.iter().rposition(|&edge| titer >= edge).unwrap_or(0) as u8
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirusPair {
    pub reference: NucleotideSequence,
    pub test: NucleotideSequence,
    pub titer: f64,
    pub binary_label: u8,
    pub level_label: u8,
    pub split: Split,
}

impl VirusPair {
    /// Labels and splits a pair; test split iff either strain dates from
    /// 1995 or later.
    pub fn new(reference: NucleotideSequence, test: NucleotideSequence, titer: f64) -> Result<Self> {
        let year = strain_year(&reference.name)?.max(strain_year(&test.name)?);
        let split = if year >= TEST_SPLIT_YEAR {
            Split::Test
        } else {
            Split::Train
        };
        Ok(VirusPair {
            reference,
            test,
            titer,
            binary_label: binary_label(titer),
            level_label: level_label(titer),
            split,
        })
    }
}

/// Joins HI records to their sequences, preserving record order.
pub fn build_dataset(records: &[HiRecord], sequences: &[NucleotideSequence]) -> Result<Vec<VirusPair>> {
    let by_name: HashMap<&str, &NucleotideSequence> =
        sequences.iter().map(|s| (s.name.as_str(), s)).collect();

    let missing: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| [r.reference_name.as_str(), r.test_name.as_str()])
        .filter(|n| !by_name.contains_key(n))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Linkage(missing.into_iter().map(String::from).collect()));
    }

    records
        .iter()
        .map(|r| {
            VirusPair::new(
                by_name[r.reference_name.as_str()].clone(),
                by_name[r.test_name.as_str()].clone(),
                r.titer,
            )
        })
        .collect()
}

/// Class counts over a dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total: usize,
    pub binary: [usize; 2],
    pub levels: [usize; 4],
    pub train: usize,
    pub test: usize,
}

pub fn summarize(pairs: &[VirusPair]) -> DatasetSummary {
    let mut s = DatasetSummary {
        total: pairs.len(),
        ..Default::default()
    };
    for p in pairs {
        s.binary[p.binary_label as usize] += 1;
        s.levels[p.level_label as usize] += 1;
        match p.split {
            Split::Train => s.train += 1,
            Split::Test => s.test += 1,
        }
    }
    s
}

/// One JSON object per line.
pub fn to_json_lines<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_json_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}
