use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dpcipi::align::OffsetMap;
use dpcipi::embed::EmbeddingTable;
use dpcipi::eval::MetricsReport;
use dpcipi::models::checkpoint::{read_checkpoint, write_checkpoint};
use dpcipi::models::{evaluate, run_ablation, train_model, EmbedInit, ModelKind, Task, TrainedModel};
use dpcipi::preprocess::preprocess_strains;
use dpcipi::seqio::{from_json_lines, summarize, to_json_lines, VirusPair};
use dpcipi::synthetic::{generate, SyntheticConfig};
use dpcipi::{
    align_sequences, build_dataset, load_table, parse_fasta, parse_hi_table, preprocess_pairs, random_table,
    split_pairs, Error, NucleotideSequence, PreprocessedPair,
};
use serde::Serialize;

use crate::config::Resolved;

pub const OFFSETS: &str = "offsets.json";
pub const DATASET: &str = "dataset.jsonl";
pub const TRAIN_PAIRS: &str = "train_pairs.jsonl";
pub const TEST_PAIRS: &str = "test_pairs.jsonl";
pub const SUMMARY: &str = "summary.json";
pub const ABLATION: &str = "ablation.json";

pub fn checkpoint_file(kind: ModelKind) -> String {
    format!("{kind}.checkpoint.json")
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> anyhow::Result<&'a Path> {
    match path {
        Some(p) => Ok(p),
        None => Err(Error::Config(format!("no {what} path configured")).into()),
    }
}

fn ensure_workdir(cfg: &Resolved) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cfg.workdir)
        .with_context(|| format!("cannot create workdir {}", cfg.workdir.display()))
}

fn read_pairs(cfg: &Resolved, name: &str) -> anyhow::Result<Vec<PreprocessedPair>> {
    let path = cfg.workfile(name);
    let text = dpcipi::error::read_to_string(&path)?;
    Ok(from_json_lines(&text)?)
}

pub fn preprocess(cfg: &Resolved) -> anyhow::Result<()> {
    let fasta = required(&cfg.run.paths.fasta, "fasta")?;
    let hi = required(&cfg.run.paths.hi_csv, "hi_csv")?;
    let sequences = parse_fasta(&dpcipi::error::read_to_string(fasta)?)
        .map_err(|e| anyhow::Error::from(e).context(format!("in {}", fasta.display())))?;
    let table = parse_hi_table(&dpcipi::error::read_to_string(hi)?)
        .map_err(|e| anyhow::Error::from(e).context(format!("in {}", hi.display())))?;
    let pairs: Vec<VirusPair> = build_dataset(&table.records, &sequences)?;
    let offsets = align_sequences(&sequences)?;
    let processed = preprocess_pairs(&pairs, &offsets, &cfg.run.preprocess)?;
    let (train, test) = split_pairs(processed.clone());

    ensure_workdir(cfg)?;
    write_json(&cfg.workfile(OFFSETS), &offsets)?;
    write(&cfg.workfile(DATASET), &to_json_lines(&processed)?)?;
    write(&cfg.workfile(TRAIN_PAIRS), &to_json_lines(&train)?)?;
    write(&cfg.workfile(TEST_PAIRS), &to_json_lines(&test)?)?;
    let summary = summarize(&pairs);
    write_json(&cfg.workfile(SUMMARY), &summary)?;
    println!(
        "pairs {} (skipped {} rows without titer): binary {} positive / {} negative; levels {:?}; train {} test {}",
        summary.total, table.skipped, summary.binary[1], summary.binary[0], summary.levels, summary.train, summary.test
    );
    Ok(())
}

/// Embedding table for training under `init`.
fn training_table(cfg: &Resolved, kind: ModelKind, init: EmbedInit) -> anyhow::Result<Option<EmbeddingTable>> {
    if !kind.needs_table() {
        return Ok(None);
    }
    let k = cfg.run.train.k;
    let table = match init {
        EmbedInit::Pretrained => {
            let path = required(&cfg.run.paths.embedding_table, "embedding_table")?;
            load_table(path)?
        }
        EmbedInit::Random { seed } => {
            let dim = match &cfg.run.paths.embedding_table {
                Some(p) if p.exists() => load_table(p)?.dim(),
                _ => cfg.run.embedding_dim,
            };
            random_table(k, dim, seed)
        }
    };
    if table.k() != k {
        return Err(Error::KMismatch {
            table: table.k(),
            sequence: k,
        }
        .into());
    }
    Ok(Some(table))
}

/// Rebuilds the table a model was trained with and checks its fingerprint.
fn model_table(cfg: &Resolved, model: &TrainedModel) -> anyhow::Result<Option<EmbeddingTable>> {
    if !model.kind.needs_table() {
        return Ok(None);
    }
    let scoped = Resolved {
        run: dpcipi_cfg_with_k(cfg, model.config.k),
        ..cfg.clone()
    };
    let table = training_table(&scoped, model.kind, model.config.embed_init)?;
    if let (Some(t), Some(fp)) = (&table, &model.table_fingerprint) {
        if &t.fingerprint() != fp {
            bail!(Error::Config(
                "embedding table does not match the one the model was trained with".into()
            ));
        }
    }
    Ok(table)
}

fn dpcipi_cfg_with_k(cfg: &Resolved, k: usize) -> crate::config::RunConfig {
    let mut run = cfg.run.clone();
    run.train.k = k;
    run
}

pub fn train(cfg: &Resolved, kind: ModelKind) -> anyhow::Result<()> {
    let pairs = read_pairs(cfg, TRAIN_PAIRS)?;
    let tc = &cfg.run.train;
    let table = training_table(cfg, kind, tc.embed_init)?;
    let model = train_model(kind, &pairs, table.as_ref(), tc)?;
    write_checkpoint(&model, cfg.workfile(&checkpoint_file(kind)))?;
    write_json(&cfg.workfile(&format!("{kind}.history.json")), &model.history)?;
    match model.history.last() {
        Some(loss) => println!("trained {kind} for {} epochs, final loss {loss:.6}", model.history.len()),
        None => println!("trained {kind}"),
    }
    Ok(())
}

pub fn evaluate_cmd(cfg: &Resolved, kind: ModelKind) -> anyhow::Result<()> {
    let model = read_checkpoint(cfg.workfile(&checkpoint_file(kind)))?;
    model.ensure_task(cfg.requested_task.unwrap_or(model.task()))?;
    let pairs = read_pairs(cfg, TEST_PAIRS)?;
    if pairs.is_empty() {
        bail!(Error::Empty("test set"));
    }
    let table = model_table(cfg, &model)?;
    let cm = evaluate(&model, &pairs, table.as_ref())?;
    let report = MetricsReport::new(model.task().name(), kind.name(), &cm)?;
    write_json(&cfg.workfile(&format!("{kind}.metrics.json")), &report)?;
    write(&cfg.workfile(&format!("{kind}.confusion.csv")), &cm.to_csv())?;
    println!(
        "{kind} ({}): accuracy {:.4}, weighted F1 {:.4}, weighted precision {:.4}, weighted recall {:.4}",
        report.task, report.accuracy, report.weighted_f1, report.weighted_precision, report.weighted_recall
    );
    Ok(())
}

pub fn ablate(cfg: &Resolved) -> anyhow::Result<()> {
    let train = read_pairs(cfg, TRAIN_PAIRS)?;
    let test = read_pairs(cfg, TEST_PAIRS)?;
    let path = required(&cfg.run.paths.embedding_table, "embedding_table")?;
    let table = load_table(path)?;
    let tasks = match cfg.requested_task {
        Some(t) => vec![t],
        None => vec![Task::Binary, Task::Multilevel],
    };
    let report = run_ablation(&train, &test, &table, &tasks, &cfg.run.train)?;
    write_json(&cfg.workfile(ABLATION), &report)?;
    for t in &report.tasks {
        for row in &t.rows {
            println!(
                "{} {:?}/{}: weighted F1 {:.4}",
                t.task, row.init, row.operator, row.metrics.weighted_f1
            );
        }
    }
    Ok(())
}

/// A raw sequence, or the first record of a FASTA file.
fn sequence_arg(arg: &str, name: &str) -> anyhow::Result<NucleotideSequence> {
    let path = Path::new(arg);
    if path.is_file() {
        let records = parse_fasta(&dpcipi::error::read_to_string(path)?)?;
        let first = records.into_iter().next().ok_or(Error::Empty("FASTA file"))?;
        return Ok(NucleotideSequence::new(name, first.accession, &first.bases)?);
    }
    Ok(NucleotideSequence::new(name, "", arg)?)
}

#[derive(Serialize)]
struct Prediction {
    model: String,
    task: Task,
    probabilities: Vec<f64>,
}

pub fn predict(cfg: &Resolved, kind: ModelKind, reference: &str, test: &str) -> anyhow::Result<()> {
    let model = read_checkpoint(cfg.workfile(&checkpoint_file(kind)))?;
    model.ensure_task(cfg.requested_task.unwrap_or(model.task()))?;
    let r = sequence_arg(reference, "reference")?;
    let t = sequence_arg(test, "test")?;
    let offsets: OffsetMap = align_sequences(&[r.clone(), t.clone()])?;
    let opts = dpcipi::PreprocessOptions {
        k: model.config.k,
        ..cfg.run.preprocess
    };
    let (rd, td, similarity) = preprocess_strains(&r, &t, &offsets, &opts)?;
    let pair = PreprocessedPair {
        reference_name: rd.strain_name,
        test_name: td.strain_name,
        k: opts.k,
        reference_tokens: rd.tokens,
        test_tokens: td.tokens,
        similarity,
        titer: f64::NAN,
        binary_label: 0,
        level_label: 0,
        split: dpcipi::Split::Test,
    };
    let table = model_table(cfg, &model)?;
    let probabilities = model.predict(&pair, table.as_ref())?;
    let out = Prediction {
        model: kind.name().to_string(),
        task: model.task(),
        probabilities,
    };
    println!("{}", serde_json::to_string(&out)?);
    Ok(())
}

pub fn generate_synthetic(out: &Path, synth: &SyntheticConfig) -> anyhow::Result<()> {
    let corpus = generate(synth)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write(&out.join("sequences.fasta"), &corpus.fasta())?;
    write(&out.join("hi_titers.csv"), &corpus.hi_csv())?;
    println!(
        "wrote {} sequences and {} HI records to {}",
        corpus.sequences.len(),
        corpus.records.len(),
        out.display()
    );
    Ok(())
}
