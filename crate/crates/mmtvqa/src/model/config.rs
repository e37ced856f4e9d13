//! Architecture hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything needed to build the network. Defaults follow the
/// tiny-transformer recipe this model family trains with: hidden size 128,
/// feed-forward 256, 4 heads, 4+4 layers, dropout 0.3, label smoothing 0.1,
/// answering-loss weight 0.3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub ffn_dim: usize,
    pub n_heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub dropout: f64,
    pub label_smoothing: f64,
    /// Weight of the answering loss in the joint objective.
    pub vqa_loss_weight: f64,
    /// Image patch feature dimensionality.
    pub d_v: usize,
    pub n_patches: usize,
    pub text_vocab: usize,
    pub target_vocab: usize,
    pub answer_vocab: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 128,
            ffn_dim: 256,
            n_heads: 4,
            encoder_layers: 4,
            decoder_layers: 4,
            dropout: 0.3,
            label_smoothing: 0.1,
            vqa_loss_weight: 0.3,
            d_v: 512,
            n_patches: 49,
            text_vocab: 8,
            target_vocab: 8,
            answer_vocab: 8,
            seed: 1,
        }
    }
}

impl ModelConfig {
    /// Small configuration for tests and gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            d_model: 8,
            ffn_dim: 16,
            n_heads: 2,
            encoder_layers: 1,
            decoder_layers: 1,
            dropout: 0.0,
            label_smoothing: 0.1,
            vqa_loss_weight: 0.3,
            d_v: 6,
            n_patches: 4,
            text_vocab: 20,
            target_vocab: 20,
            answer_vocab: 20,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 {
            return Err(Error::Config("d_model and n_heads must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0,1)", self.dropout)));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!(
                "label_smoothing {} outside [0,1)",
                self.label_smoothing
            )));
        }
        if self.vqa_loss_weight < 0.0 || !self.vqa_loss_weight.is_finite() {
            return Err(Error::Config(format!(
                "vqa_loss_weight {} must be finite and >= 0",
                self.vqa_loss_weight
            )));
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return Err(Error::Config("need at least one encoder and decoder layer".into()));
        }
        for (name, v) in [
            ("d_v", self.d_v),
            ("n_patches", self.n_patches),
            ("text_vocab", self.text_vocab),
            ("target_vocab", self.target_vocab),
            ("answer_vocab", self.answer_vocab),
            ("ffn_dim", self.ffn_dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_training_recipe() {
        let c = ModelConfig::default();
        assert_eq!(c.d_model, 128);
        assert_eq!(c.ffn_dim, 256);
        assert_eq!(c.n_heads, 4);
        assert_eq!(c.encoder_layers, 4);
        assert_eq!(c.decoder_layers, 4);
        assert_eq!(c.dropout, 0.3);
        assert_eq!(c.label_smoothing, 0.1);
        assert_eq!(c.vqa_loss_weight, 0.3);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn head_divisibility_is_enforced() {
        let c = ModelConfig { n_heads: 3, ..ModelConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn dropout_range_is_enforced() {
        let c = ModelConfig { dropout: 1.0, ..ModelConfig::default() };
        assert!(c.validate().is_err());
        let c = ModelConfig { dropout: -0.1, ..ModelConfig::default() };
        assert!(c.validate().is_err());
    }
}
