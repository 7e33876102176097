use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LinearClassifier, MemoryBank, MlpEmbedding};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "geocot-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trainable state of one adaptation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptModel {
    pub embedding: MlpEmbedding,
    pub classifier: LinearClassifier,
    pub bank: MemoryBank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layer_widths: Vec<usize>,
    pub num_classes: usize,
    pub seed: u64,
    pub config_hash: String,
    pub epoch: usize,
    pub model: AdaptModel,
}

impl Checkpoint {
    pub fn new(model: AdaptModel, seed: u64, config_hash: String, epoch: usize) -> Self {
        let mut widths = vec![model.embedding.input_dim()];
        widths.extend(model.embedding.layers.iter().map(|l| l.weights.ncols()));
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            layer_widths: widths,
            num_classes: model.classifier.classes(),
            seed,
            config_hash,
            epoch,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Corrupted(format!(
                "{} is not a checkpoint (format {:?})",
                path.display(),
                ck.format
            )));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: ck.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let embedding = MlpEmbedding::from_layers(ck.model.embedding.layers.clone())?;
        let mut widths = vec![embedding.input_dim()];
        widths.extend(embedding.layers.iter().map(|l| l.weights.ncols()));
        if widths != ck.layer_widths
            || ck.model.classifier.latent_dim() != embedding.latent_dim()
            || ck.model.classifier.classes() != ck.num_classes
            || ck.model.bank.entries().ncols() != embedding.latent_dim()
        {
            return Err(Error::Corrupted(format!(
                "{}: recorded shapes disagree with stored parameters",
                path.display()
            )));
        }
        if !embedding.all_finite() || !ck.model.classifier.all_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(ck)
    }
}
