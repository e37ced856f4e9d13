//! Run configuration: a flat `key = value` file covering every model and
//! training knob. Unknown keys are rejected, and the effective
//! configuration is persisted next to run outputs for provenance.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::train::trainer::{TrainSettings, ValMetric};

/// All tunable knobs with their documented defaults (the standard training
/// recipe: hidden 128, ffn 256, 4 heads, 4+4 layers, dropout 0.3,
/// smoothing 0.1, lambda 0.3, lr 0.005, warmup 2000, patience 10,
/// average last 10).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub d_model: usize,
    pub ffn_dim: usize,
    pub n_heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub dropout: f64,
    pub label_smoothing: f64,
    pub vqa_loss_weight: f64,
    pub base_lr: f64,
    pub warmup_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub max_tokens: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub keep_checkpoints: usize,
    pub average_last: usize,
    pub max_grad_norm: f64,
    pub val_metric: String,
    pub min_count: usize,
    pub max_len: usize,
    pub beam_size: usize,
    /// Masked fine-tuning: fraction of training examples whose source
    /// lexicon words are replaced by `<mask>`. 0 disables.
    pub train_mask_rate: f64,
    /// Word-list file for masked fine-tuning (one word per line); empty
    /// disables.
    pub mask_lexicon: String,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d_model: 128,
            ffn_dim: 256,
            n_heads: 4,
            encoder_layers: 4,
            decoder_layers: 4,
            dropout: 0.3,
            label_smoothing: 0.1,
            vqa_loss_weight: 0.3,
            base_lr: 0.005,
            warmup_steps: 2000,
            beta1: 0.9,
            beta2: 0.98,
            adam_eps: 1e-8,
            max_tokens: 4096,
            patience: 10,
            max_epochs: 200,
            keep_checkpoints: 10,
            average_last: 10,
            max_grad_norm: 0.0,
            val_metric: "mmt_loss".into(),
            min_count: 1,
            max_len: 64,
            beam_size: 1,
            train_mask_rate: 0.0,
            mask_lexicon: String::new(),
            seed: 1,
        }
    }
}

macro_rules! config_fields {
    ($self:ident, $apply:ident) => {
        $apply!(d_model, usize);
        $apply!(ffn_dim, usize);
        $apply!(n_heads, usize);
        $apply!(encoder_layers, usize);
        $apply!(decoder_layers, usize);
        $apply!(dropout, f64);
        $apply!(label_smoothing, f64);
        $apply!(vqa_loss_weight, f64);
        $apply!(base_lr, f64);
        $apply!(warmup_steps, usize);
        $apply!(beta1, f64);
        $apply!(beta2, f64);
        $apply!(adam_eps, f64);
        $apply!(max_tokens, usize);
        $apply!(patience, usize);
        $apply!(max_epochs, usize);
        $apply!(keep_checkpoints, usize);
        $apply!(average_last, usize);
        $apply!(max_grad_norm, f64);
        $apply!(val_metric, String);
        $apply!(min_count, usize);
        $apply!(max_len, usize);
        $apply!(beam_size, usize);
        $apply!(train_mask_rate, f64);
        $apply!(mask_lexicon, String);
        $apply!(seed, u64);
    };
}

impl RunConfig {
    /// Parse `key = value` lines; `#` starts a comment. Unknown keys are
    /// errors so typos cannot silently fall back to defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let mut matched = false;
            macro_rules! apply {
                ($field:ident, String) => {
                    if key == stringify!($field) {
                        config.$field = value.to_string();
                        matched = true;
                    }
                };
                ($field:ident, $ty:ty) => {
                    if key == stringify!($field) {
                        config.$field = value.parse::<$ty>().map_err(|_| {
                            Error::Config(format!(
                                "line {}: cannot parse {value:?} as {} for key {key}",
                                lineno + 1,
                                stringify!($ty)
                            ))
                        })?;
                        matched = true;
                    }
                };
            }
            config_fields!(config, apply);
            if !matched {
                return Err(Error::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// Render every key, parseable back to an identical config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        macro_rules! apply {
            ($field:ident, $ty:tt) => {
                writeln!(out, "{} = {}", stringify!($field), self.$field).unwrap();
            };
        }
        config_fields!(self, apply);
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.val_metric != "mmt_loss" && self.val_metric != "total_loss" {
            return Err(Error::Config(format!(
                "val_metric must be mmt_loss or total_loss, got {:?}",
                self.val_metric
            )));
        }
        if self.beam_size == 0 {
            return Err(Error::Config("beam_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.train_mask_rate) {
            return Err(Error::Config(format!(
                "train_mask_rate {} outside [0, 1]",
                self.train_mask_rate
            )));
        }
        if self.train_mask_rate > 0.0 && self.mask_lexicon.is_empty() {
            return Err(Error::Config(
                "train_mask_rate > 0 requires mask_lexicon to name a word list".into(),
            ));
        }
        Ok(())
    }

    pub fn val_metric(&self) -> ValMetric {
        match self.val_metric.as_str() {
            "total_loss" => ValMetric::TotalLoss,
            _ => ValMetric::MmtLoss,
        }
    }

    /// Instantiate the architecture config for concrete data dimensions.
    pub fn model_config(
        &self,
        d_v: usize,
        n_patches: usize,
        text_vocab: usize,
        target_vocab: usize,
        answer_vocab: usize,
    ) -> ModelConfig {
        ModelConfig {
            d_model: self.d_model,
            ffn_dim: self.ffn_dim,
            n_heads: self.n_heads,
            encoder_layers: self.encoder_layers,
            decoder_layers: self.decoder_layers,
            dropout: self.dropout,
            label_smoothing: self.label_smoothing,
            vqa_loss_weight: self.vqa_loss_weight,
            d_v,
            n_patches,
            text_vocab,
            target_vocab,
            answer_vocab,
            seed: self.seed,
        }
    }

    pub fn train_settings(&self) -> TrainSettings {
        TrainSettings {
            max_tokens: self.max_tokens,
            max_epochs: self.max_epochs,
            patience: self.patience,
            keep_checkpoints: self.keep_checkpoints,
            seed: self.seed,
            base_lr: self.base_lr,
            warmup_steps: self.warmup_steps,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            max_grad_norm: self.max_grad_norm,
            val_metric: self.val_metric(),
            val_score_override: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_recipe() {
        let c = RunConfig::default();
        assert_eq!(c.d_model, 128);
        assert_eq!(c.ffn_dim, 256);
        assert_eq!(c.n_heads, 4);
        assert_eq!(c.dropout, 0.3);
        assert_eq!(c.label_smoothing, 0.1);
        assert_eq!(c.base_lr, 0.005);
        assert_eq!(c.warmup_steps, 2000);
        assert_eq!(c.patience, 10);
        assert_eq!(c.vqa_loss_weight, 0.3);
        assert_eq!(c.average_last, 10);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let c = RunConfig::parse("d_model = 64 # small\n\nseed=9\nval_metric = total_loss\n")
            .unwrap();
        assert_eq!(c.d_model, 64);
        assert_eq!(c.seed, 9);
        assert_eq!(c.val_metric(), ValMetric::TotalLoss);
        assert_eq!(c.ffn_dim, 256, "untouched keys keep defaults");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        match RunConfig::parse("d_modle = 64\n") {
            Err(Error::Config(msg)) => assert!(msg.contains("d_modle")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn bad_values_name_the_key() {
        match RunConfig::parse("dropout = lots\n") {
            Err(Error::Config(msg)) => assert!(msg.contains("dropout")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn render_parse_roundtrip_is_identity() {
        let c = RunConfig {
            d_model: 48,
            adam_eps: 3e-9,
            val_metric: "total_loss".into(),
            seed: 77,
            ..RunConfig::default()
        };
        let back = RunConfig::parse(&c.render()).unwrap();
        assert_eq!(back, c);
    }
}
