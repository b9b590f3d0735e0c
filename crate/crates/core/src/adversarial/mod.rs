//! Three-player adversarial oversampling: a class-conditional mixture of
//! convex-combination generators (G), a critic (D) and the classifier (Q).
//!
//! Two regimes share the same machinery and differ only in which log term
//! each player uses on generated rows:
//!
//! | regime | G on `G(z|i)`         | Q on generated rows          |
//! |--------|-----------------------|------------------------------|
//! | AO     | complement CE to `i`  | CE toward the generating class |
//! | DO     | CE toward `i`         | complement CE to the generating class |
//!
//! The baseline regime trains Q alone on the real rows.

mod checkpoint;
mod generator;
mod losses;
mod plan;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use generator::{BoundGenerator, Generated, GeneratorMixture};
pub use losses::{classifier_loss, critic_loss, generator_loss};
pub use plan::{make_sampling_plan, SamplingPlan};
pub use train::{predict, train, EpochLosses, EpochRecord, Player, ThreePlayerState, TrainOutcome};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::MetricError;
use crate::nn::{AdamConfig, NnError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversarialError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite {player} loss {value} in epoch {epoch}")]
    NonFinite { epoch: usize, player: Player, value: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "Q")]
    Baseline,
    #[serde(rename = "AO")]
    Ao,
    #[serde(rename = "DO")]
    Do,
}

/// The `s(·)` applied to critic outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// `s(x) = x` with a gradient penalty on the critic.
    #[default]
    WganGp,
    /// `s(x) = log x` on a sigmoid discriminator.
    Vanilla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub regime: Regime,
    pub operator: Operator,
    /// Gradient penalty weight.
    pub lambda: f64,
    pub latent_dim: usize,
    /// Hidden widths of the generator trunk.
    pub g_widths: Vec<usize>,
    /// Hidden widths of the critic.
    pub d_widths: Vec<usize>,
    /// Hidden widths of the classifier.
    pub q_widths: Vec<usize>,
    pub leaky_slope: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub critic_steps: usize,
    pub adam_g: AdamConfig,
    pub adam_d: AdamConfig,
    pub adam_q: AdamConfig,
    /// Oversampling fraction: class `k` gets `⌈f·(p_C − p_k)⌉` generated rows
    /// per epoch in the classifier update. `0` disables the adversarial players.
    pub f: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regime: Regime::Baseline,
            operator: Operator::WganGp,
            lambda: 10.0,
            latent_dim: 32,
            g_widths: vec![128, 64],
            d_widths: vec![128, 64],
            q_widths: vec![256, 128, 64],
            leaky_slope: 0.2,
            epochs: 100,
            batch_size: 64,
            critic_steps: 2,
            adam_g: AdamConfig::adversarial(),
            adam_d: AdamConfig::adversarial(),
            adam_q: AdamConfig::classifier(),
            f: 1.0,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AdversarialError> {
        let fail = |m: String| Err(AdversarialError::Config(m));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.critic_steps == 0 {
            return fail("critic_steps must be at least 1".into());
        }
        if self.latent_dim == 0 {
            return fail("latent_dim must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.f) {
            return fail(format!("f must lie in [0, 1], got {}", self.f));
        }
        if !(self.lambda >= 0.0) {
            return fail(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.g_widths.is_empty() {
            return fail("g_widths needs at least one hidden layer".into());
        }
        for (name, w) in [("g_widths", &self.g_widths), ("d_widths", &self.d_widths), ("q_widths", &self.q_widths)] {
            if w.contains(&0) {
                return fail(format!("{name} contains a zero width"));
            }
        }
        for (name, a) in [("adam_g", &self.adam_g), ("adam_d", &self.adam_d), ("adam_q", &self.adam_q)] {
            if !(a.lr > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
                return fail(format!("{name} has an invalid learning rate or beta"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the config's JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex_digest(json.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
