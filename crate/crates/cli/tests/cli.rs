use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// A small synthetic corpus, a random table and a config pointing at them.
    fn new(train_overrides: &str) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        f.ok(&["generate-synthetic", "--out", "data", "--pairs", "60"]);
        fs::write(f.path("table.tsv"), dpcipi::random_table(4, 8, 1).to_tsv()).unwrap();
        let train = format!(
            "{{\"k\": 4, \"hidden\": 4, \"mlp_hidden\": 4, \"epochs\": 2, \"learning_rate\": 0.003{train_overrides}}}"
        );
        let cfg = format!(
            "{{\"paths\": {{\"fasta\": \"data/sequences.fasta\", \"hi_csv\": \"data/hi_titers.csv\", \
             \"embedding_table\": \"table.tsv\", \"workdir\": \"work\"}}, \"train\": {train}, \"embedding_dim\": 8}}"
        );
        fs::write(f.path("cfg.json"), cfg).unwrap();
        f
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_dpcipi"))
            .args(args)
            .current_dir(self.dir.path())
            .env_remove("DPCIPI_WORKDIR")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn with_config(&self, args: &[&str]) -> String {
        let mut all = vec!["--config", "cfg.json"];
        all.extend_from_slice(args);
        self.ok(&all)
    }

    fn json(&self, rel: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(rel)).unwrap()).unwrap()
    }
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let f = Fixture::new("");
    let mut snapshots = Vec::new();
    for work in ["run1", "run2"] {
        for cmd in [&["preprocess"][..], &["train"], &["evaluate"]] {
            let mut args = vec!["--workdir", work];
            args.extend_from_slice(cmd);
            f.with_config(&args);
        }
        snapshots.push(dir_contents(&f.path(work)));
    }
    assert_eq!(snapshots[0].len(), 9);
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn train_outputs_and_flags() {
    let f = Fixture::new("");
    f.with_config(&["preprocess"]);
    f.with_config(&["--epochs", "1", "--operator", "concat", "train"]);
    assert_eq!(f.json("work/dpcipi.history.json").as_array().unwrap().len(), 1);
    assert_eq!(f.json("work/dpcipi.checkpoint.json")["operator"], "concat");

    f.with_config(&["--seed", "4", "train"]);
    let ck = f.json("work/dpcipi.checkpoint.json");
    assert_eq!(ck["operator"], "mii");
    assert_eq!(ck["model"]["config"]["seed"], 4);
    assert_eq!(ck["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn default_schedule_records_fifty_epochs() {
    let f = Fixture::new("");
    let cfg = "{\"paths\": {\"fasta\": \"data/sequences.fasta\", \"hi_csv\": \"data/hi_titers.csv\", \
               \"workdir\": \"work\"}, \"train\": {\"k\": 4, \"hidden\": 2, \"mlp_hidden\": 2}, \"embedding_dim\": 4}";
    fs::write(f.path("default.json"), cfg).unwrap();
    f.ok(&["--config", "default.json", "preprocess"]);
    f.ok(&["--config", "default.json", "--init", "random", "train"]);
    assert_eq!(f.json("work/dpcipi.history.json").as_array().unwrap().len(), 50);
}

#[test]
fn evaluation_reports_and_confusion_supports() {
    let f = Fixture::new("");
    f.with_config(&["preprocess"]);
    f.with_config(&["train", "--model", "lr_sim"]);
    f.with_config(&["evaluate", "--model", "lr_sim"]);
    let report = f.json("work/lr_sim.metrics.json");
    for key in ["accuracy", "weighted_f1", "weighted_precision", "weighted_recall"] {
        // a distance-determined corpus is perfectly separable by the similarity feature
        assert_eq!(report[key], 1.0, "{key}");
    }
    let test_pairs = fs::read_to_string(f.path("work/test_pairs.jsonl")).unwrap();
    let mut supports = [0usize; 2];
    for line in test_pairs.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        supports[v["binary_label"].as_u64().unwrap() as usize] += 1;
    }
    let csv = fs::read_to_string(f.path("work/lr_sim.confusion.csv")).unwrap();
    let rows: Vec<usize> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|c| c.parse::<usize>().unwrap()).sum())
        .collect();
    assert_eq!(rows, supports);
}

#[test]
fn task_mismatch_is_an_input_error() {
    let f = Fixture::new("");
    f.with_config(&["preprocess"]);
    f.with_config(&["train"]);
    let out = f.run(&["--config", "cfg.json", "--task", "multilevel", "evaluate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("task mismatch"));
}

#[test]
fn missing_fasta_exits_with_input_error() {
    let f = Fixture::new("");
    fs::remove_file(f.path("data/sequences.fasta")).unwrap();
    let out = f.run(&["--config", "cfg.json", "preprocess"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sequences.fasta"));
}

#[test]
fn workdir_env_override() {
    let f = Fixture::new("");
    let out = Command::new(env!("CARGO_BIN_EXE_dpcipi"))
        .args(["--config", "cfg.json", "preprocess"])
        .current_dir(f.dir.path())
        .env("DPCIPI_WORKDIR", "elsewhere")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(f.path("elsewhere/train_pairs.jsonl").exists());
    assert!(!f.path("work").exists());
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn tensor(ck: &Value, name: &str) -> Vec<f64> {
    ck["model"]["params"]["tensors"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == name)
        .unwrap()["data"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect()
}

#[test]
fn predict_identical_sequences_gives_bias_only_output() {
    let f = Fixture::new("");
    f.with_config(&["preprocess"]);
    f.with_config(&["train"]);
    let seq = "ACGTTGCAAGCTTACG";
    let out: Value = serde_json::from_str(&f.with_config(&["predict", seq, seq])).unwrap();
    let probs: Vec<f64> = out["probabilities"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    // both strains deduplicate to nothing, so the head sees a zero vector
    let ck = f.json("work/dpcipi.checkpoint.json");
    let (b1, w2, b2) = (tensor(&ck, "mlp.b1"), tensor(&ck, "mlp.w2"), tensor(&ck, "mlp.b2"));
    let h: Vec<f64> = b1.iter().map(|v| v.max(0.0)).collect();
    let logits: Vec<f64> = (0..b2.len())
        .map(|c| b2[c] + (0..h.len()).map(|j| w2[c * h.len() + j] * h[j]).sum::<f64>())
        .collect();
    let want = softmax(&logits);
    for (p, w) in probs.iter().zip(&want) {
        assert!((p - w).abs() < 1e-12, "{probs:?} vs {want:?}");
    }

    let other: Value = serde_json::from_str(&f.with_config(&["predict", seq, "ACGTTGCATGCTTACG"])).unwrap();
    assert_ne!(other["probabilities"], out["probabilities"]);
}

#[test]
fn predict_rejects_bad_sequences() {
    let f = Fixture::new("");
    f.with_config(&["preprocess"]);
    f.with_config(&["train", "--model", "lr_sim"]);
    let bad = f.run(&["--config", "cfg.json", "predict", "--model", "lr_sim", "ACGTXACGT", "ACGTAACGT"]);
    assert_eq!(bad.status.code(), Some(2));
    let short = f.run(&["--config", "cfg.json", "predict", "--model", "lr_sim", "ACG", "ACGTAACGT"]);
    assert_eq!(short.status.code(), Some(2));
}

#[test]
fn ablation_report_is_reproducible() {
    let f = Fixture::new(", \"epochs\": 1");
    f.with_config(&["preprocess"]);
    f.with_config(&["ablate"]);
    let first = fs::read(f.path("work/ablation.json")).unwrap();
    f.with_config(&["ablate"]);
    assert_eq!(first, fs::read(f.path("work/ablation.json")).unwrap());
    let report: Value = serde_json::from_slice(&first).unwrap();
    let tasks = report["tasks"].as_array().unwrap();
    assert_eq!(tasks.len(), 2);
    for t in tasks {
        assert_eq!(t["rows"].as_array().unwrap().len(), 4);
    }
    assert_eq!(report["seeds"]["training"], 0);
}

#[test]
fn unknown_model_is_rejected() {
    let f = Fixture::new("");
    let out = f.run(&["train", "--model", "cnn"]);
    assert_eq!(out.status.code(), Some(2));
}
