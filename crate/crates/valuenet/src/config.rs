use serde::{Deserialize, Serialize};
use swarmtrack_core::{FEATURE_DIM, N_ACTIONS};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

/// Row-wise map applied to the scaled attention scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionNormalizer {
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub n_heads: usize,
    pub n_attention_blocks: usize,
    pub decoder_hidden: usize,
    pub n_actions: usize,
    pub activation: Activation,
    pub attention_normalizer: AttentionNormalizer,
    /// Fixed per-feature multipliers applied before the encoder. Raw ranges
    /// are tens of meters and tens of nats; this brings them near unit scale.
    pub input_scale: Vec<f64>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            feature_dim: FEATURE_DIM,
            embed_dim: 64,
            n_heads: 2,
            n_attention_blocks: 2,
            decoder_hidden: 128,
            n_actions: N_ACTIONS,
            activation: Activation::Relu,
            attention_normalizer: AttentionNormalizer::Softmax,
            input_scale: vec![0.1, 1.0 / std::f64::consts::PI, 0.5, 1.0, 0.1, 1.0],
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim != FEATURE_DIM {
            return Err(Error::Config(format!("feature_dim must be {FEATURE_DIM}")));
        }
        if self.n_actions != N_ACTIONS {
            return Err(Error::Config(format!("n_actions must be {N_ACTIONS}")));
        }
        if self.embed_dim == 0 || self.n_heads == 0 || self.decoder_hidden == 0 {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if self.embed_dim % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} not divisible by n_heads {}",
                self.embed_dim, self.n_heads
            )));
        }
        if self.input_scale.len() != self.feature_dim {
            return Err(Error::Config("input_scale needs one entry per feature".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.n_heads
    }
}
