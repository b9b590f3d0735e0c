use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdversarialError, GeneratorMixture, TrainConfig};
use crate::nn::Mlp;

/// Bumped whenever the on-disk layout changes incompatibly.
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// JSON dump of every player's parameters together with the config that
/// produced them. Floats are written in shortest round-trip form, so a
/// save/load cycle is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config_hash: String,
    pub config: TrainConfig,
    pub classifier: Mlp,
    pub critic: Option<Mlp>,
    pub generator: Option<GeneratorMixture>,
}

impl Checkpoint {
    pub fn new(
        config: &TrainConfig,
        classifier: Mlp,
        critic: Option<Mlp>,
        generator: Option<GeneratorMixture>,
    ) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config_hash: config.hash(),
            config: config.clone(),
            classifier,
            critic,
            generator,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), AdversarialError> {
        let json = serde_json::to_string(self).map_err(|e| AdversarialError::Checkpoint(e.to_string()))?;
        fs::write(path, json).map_err(|e| AdversarialError::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// Reads a checkpoint, rejecting other format versions and files whose
    /// stored hash does not match their config.
    pub fn load(path: &Path) -> Result<Self, AdversarialError> {
        let text =
            fs::read_to_string(path).map_err(|e| AdversarialError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| AdversarialError::Checkpoint(e.to_string()))?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(AdversarialError::Checkpoint(format!(
                "format version {} is not supported (expected {CHECKPOINT_FORMAT_VERSION})",
                ck.format_version
            )));
        }
        if ck.config_hash != ck.config.hash() {
            return Err(AdversarialError::Checkpoint("config hash does not match the stored config".into()));
        }
        Ok(ck)
    }
}
