use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Operator, Pooling};
use crate::preprocess::{PreprocessedPair, DEFAULT_K};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Binary,
    Multilevel,
}

impl Task {
    pub fn classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::Multilevel => 4,
        }
    }

    pub fn label(self, pair: &PreprocessedPair) -> usize {
        match self {
            Task::Binary => pair.binary_label as usize,
            Task::Multilevel => pair.level_label as usize,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multilevel => "multilevel",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "multilevel" => Ok(Task::Multilevel),
            other => Err(Error::Config(format!("unknown task '{other}' (binary|multilevel)"))),
        }
    }
}

/// Where the k-mer vectors come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EmbedInit {
    #[default]
    Pretrained,
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub k: usize,
    pub embed_init: EmbedInit,
    pub operator: Operator,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub hidden: usize,
    pub mlp_hidden: usize,
    pub pooling: Pooling,
    pub freeze_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::Binary,
            k: DEFAULT_K,
            embed_init: EmbedInit::Pretrained,
            operator: Operator::Mii,
            epochs: 50,
            batch_size: 10,
            learning_rate: 1e-4,
            seed: 0,
            hidden: 128,
            mlp_hidden: 128,
            pooling: Pooling::Final,
            freeze_embeddings: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.hidden == 0 || self.mlp_hidden == 0 {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.learning_rate, c.k), (50, 10, 1e-4, 6));
        assert!(c.validate().is_ok());
        let parsed: TrainConfig = serde_json::from_str("{\"epochs\": 3}").unwrap();
        assert_eq!(parsed.epochs, 3);
        assert_eq!(parsed.batch_size, 10);
        assert!(serde_json::from_str::<TrainConfig>("{\"epochz\": 3}").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = TrainConfig::default();
        let b = TrainConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn invalid_configs() {
        for c in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { k: 0, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
