//! Versioned JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainedModel;
use crate::error::{read_to_string, Error, Result};
use crate::nn::Operator;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config_hash: String,
    /// Fusion operator for siamese models; absent otherwise.
    pub operator: Option<Operator>,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn new(model: TrainedModel) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config_hash: model.config.hash(),
            operator: model.operator(),
            model,
        }
    }
}

/// Serializes `model`; floats round-trip exactly.
pub fn save_checkpoint(model: &TrainedModel) -> Result<String> {
    Ok(serde_json::to_string(&Checkpoint::new(model.clone()))?)
}

pub fn load_checkpoint(text: &str) -> Result<TrainedModel> {
    let ck: Checkpoint = serde_json::from_str(text)?;
    if ck.format_version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ck.format_version
        )));
    }
    if ck.config_hash != ck.model.config.hash() {
        return Err(Error::Format("checkpoint config hash does not match its config".into()));
    }
    if ck.operator != ck.model.operator() {
        return Err(Error::Format("checkpoint operator does not match its network".into()));
    }
    Ok(ck.model)
}

pub fn write_checkpoint(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, save_checkpoint(model)?).map_err(|e| Error::file(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<TrainedModel> {
    load_checkpoint(&read_to_string(path)?)
}
