//! Joint training loop: token-budget batches, summed-gradient updates over
//! both objectives, per-epoch validation with early stopping, and a ring
//! buffer of checkpoints.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::batch::{make_batches, TrainingExample};
use crate::data::features::ImageFeatureSet;
use crate::error::{Error, Result};
use crate::model::checkpoint::save_checkpoint;
use crate::model::forward::Model;
use crate::model::layers::ForwardMode;
use crate::train::adam::{adam_step, OptimizerState};
use crate::train::loss::total_loss;

/// Validation criterion for early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValMetric {
    /// Translation loss only (default).
    MmtLoss,
    /// Joint loss at the configured lambda.
    TotalLoss,
}

/// Training hyperparameters beyond what [`crate::model::ModelConfig`]
/// carries.
#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub max_tokens: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    /// Ring buffer size for on-disk checkpoints.
    pub keep_checkpoints: usize,
    pub seed: u64,
    pub base_lr: f64,
    pub warmup_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// 0 disables clipping.
    pub max_grad_norm: f64,
    pub val_metric: ValMetric,
    /// Test hook: report this fixed validation score every epoch.
    pub val_score_override: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            max_tokens: 4096,
            max_epochs: 200,
            patience: 10,
            keep_checkpoints: 10,
            seed: 1,
            base_lr: 0.005,
            warmup_steps: 2000,
            beta1: 0.9,
            beta2: 0.98,
            adam_eps: 1e-8,
            max_grad_norm: 0.0,
            val_metric: ValMetric::MmtLoss,
            val_score_override: None,
        }
    }
}

/// One per-update record; loss values are batch token averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub mmt_loss: f64,
    pub vqa_loss: f64,
    pub total_loss: f64,
    pub lr: f64,
}

/// One per-epoch record; losses are token-weighted epoch means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mmt_loss: f64,
    pub vqa_loss: f64,
    pub val_score: f64,
    pub lr: f64,
}

/// Loss curves of a run.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
}

impl TrainLog {
    /// `epoch,mmt_loss,vqa_loss,val_score,lr` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mmt_loss,vqa_loss,val_score,lr\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.mmt_loss, e.vqa_loss, e.val_score, e.lr
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn parse_csv(text: &str) -> Result<Vec<EpochRecord>> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("epoch,") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::Format(format!("log row {}: expected 5 columns", i + 1)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Format(format!("log row {}: bad number {s:?}", i + 1)))
            };
            rows.push(EpochRecord {
                epoch: parse(cols[0])? as usize,
                mmt_loss: parse(cols[1])?,
                vqa_loss: parse(cols[2])?,
                val_score: parse(cols[3])?,
                lr: parse(cols[4])?,
            });
        }
        Ok(rows)
    }
}

/// Training inputs: examples plus the feature set resolving their images.
pub struct TrainData<'a> {
    pub train: &'a [TrainingExample],
    pub val: &'a [TrainingExample],
    pub features: &'a ImageFeatureSet,
}

/// A finished (or early-stopped) run.
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
    pub ckpt_dir: PathBuf,
}

fn features_of(features: &ImageFeatureSet, ex: &TrainingExample) -> Result<Array2<f64>> {
    features
        .get(&ex.image_id)
        .ok_or_else(|| Error::Validation(format!("image id {:?} not in feature set", ex.image_id)))
}

/// Numerically-sorted `epoch_<n>` checkpoint directories under `dir`.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir.display().to_string(), e))?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(n) = name.strip_prefix("epoch_").and_then(|s| s.parse::<usize>().ok()) {
            out.push((n, entry.path()));
        }
    }
    out.sort_by_key(|(n, _)| *n);
    Ok(out)
}

/// Run the joint optimization.
///
/// Per epoch: shuffle-and-pack batches (seeded by `seed + epoch`), one Adam
/// update per batch with gradients accumulated over both objectives, then a
/// validation pass. Stops at `max_epochs` or after `patience` epochs without
/// validation improvement. Checkpoints land under `out_dir/ckpt/epoch_<n>`,
/// keeping the last `keep_checkpoints`.
pub fn train(
    mut model: Model,
    data: &TrainData,
    settings: &TrainSettings,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Argument("train and validation splits must be non-empty".into()));
    }
    let ckpt_dir = out_dir.join("ckpt");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(ckpt_dir.display().to_string(), e))?;

    let lambda = model.config.vqa_loss_weight;
    let mut opt = OptimizerState::with_hyperparams(
        &model.params,
        settings.beta1,
        settings.beta2,
        settings.adam_eps,
        settings.base_lr,
        settings.warmup_steps,
    );
    opt.max_grad_norm = settings.max_grad_norm;
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(0x5eed));

    let mut log = TrainLog::default();
    let mut best_val = f64::INFINITY;
    let mut epochs_since_best = 0usize;

    for epoch in 1..=settings.max_epochs.max(1) {
        let batches =
            make_batches(data.train, settings.max_tokens, settings.seed.wrapping_add(epoch as u64))?;
        let mut epoch_mmt_sum = 0.0;
        let mut epoch_vqa_sum = 0.0;
        let mut epoch_mmt_tokens = 0usize;
        let mut epoch_vqa_tokens = 0usize;

        for batch in &batches {
            let mmt_tokens: usize = batch.iter().map(|&i| data.train[i].target_ids.len() + 1).sum();
            let vqa_tokens: usize = batch.iter().map(|&i| data.train[i].answer_ids.len() + 1).sum();
            let mut grads: IndexMap<String, Array2<f64>> = IndexMap::new();
            let mut batch_mmt_sum = 0.0;
            let mut batch_vqa_sum = 0.0;

            for &i in batch {
                let ex = &data.train[i];
                let feats = features_of(data.features, ex)?;
                let mut mode = ForwardMode::train(model.config.dropout, &mut dropout_rng);
                let mut pass = model.forward_pass(ex, &feats, &mut mode)?;
                let root = pass
                    .combined_loss(1.0 / mmt_tokens as f64, lambda / vqa_tokens as f64);
                let (ms, vs) = pass.loss_values();
                batch_mmt_sum += ms;
                batch_vqa_sum += vs;
                for (name, g) in pass.gradients(root) {
                    match grads.get_mut(&name) {
                        Some(acc) => *acc += &g,
                        None => {
                            grads.insert(name, g);
                        }
                    }
                }
            }

            let l_mmt = batch_mmt_sum / mmt_tokens as f64;
            let l_vqa = batch_vqa_sum / vqa_tokens as f64;
            if !l_mmt.is_finite() || !l_vqa.is_finite() {
                return Err(Error::Diverged { epoch, step: opt.step + 1 });
            }
            let l_total = total_loss(l_mmt, l_vqa, lambda)?;
            adam_step(&mut model.params, &grads, &mut opt)?;
            log.steps.push(StepRecord {
                epoch,
                step: opt.step,
                mmt_loss: l_mmt,
                vqa_loss: l_vqa,
                total_loss: l_total,
                lr: opt.lr(),
            });
            epoch_mmt_sum += batch_mmt_sum;
            epoch_vqa_sum += batch_vqa_sum;
            epoch_mmt_tokens += mmt_tokens;
            epoch_vqa_tokens += vqa_tokens;
        }

        let val_score = match settings.val_score_override {
            Some(score) => score,
            None => validation_score(&model, data, settings.val_metric)?,
        };
        log.epochs.push(EpochRecord {
            epoch,
            mmt_loss: epoch_mmt_sum / epoch_mmt_tokens as f64,
            vqa_loss: epoch_vqa_sum / epoch_vqa_tokens as f64,
            val_score,
            lr: opt.lr(),
        });

        save_checkpoint(&ckpt_dir.join(format!("epoch_{epoch}")), &model.config, &model.params)?;
        if epoch > settings.keep_checkpoints {
            let stale = ckpt_dir.join(format!("epoch_{}", epoch - settings.keep_checkpoints));
            if stale.exists() {
                std::fs::remove_dir_all(&stale)
                    .map_err(|e| Error::io(stale.display().to_string(), e))?;
            }
        }

        if val_score < best_val {
            best_val = val_score;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= settings.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome { model, log, ckpt_dir })
}

/// Token-weighted validation loss, dropout off.
pub fn validation_score(model: &Model, data: &TrainData, metric: ValMetric) -> Result<f64> {
    let mut mmt_sum = 0.0;
    let mut vqa_sum = 0.0;
    let mut mmt_tokens = 0usize;
    let mut vqa_tokens = 0usize;
    for ex in data.val {
        let feats = features_of(data.features, ex)?;
        let pass = model.forward_pass(ex, &feats, &mut ForwardMode::eval())?;
        let (ms, vs) = pass.loss_values();
        mmt_sum += ms;
        vqa_sum += vs;
        mmt_tokens += pass.mmt_tokens;
        vqa_tokens += pass.vqa_tokens;
    }
    let mmt = mmt_sum / mmt_tokens as f64;
    match metric {
        ValMetric::MmtLoss => Ok(mmt),
        ValMetric::TotalLoss => {
            total_loss(mmt, vqa_sum / vqa_tokens as f64, model.config.vqa_loss_weight)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::features::ImageFeatureSet;
    use crate::model::config::ModelConfig;

    /// 8-example copy corpus over a small id range, one image each.
    fn tiny_data() -> (Vec<TrainingExample>, ImageFeatureSet) {
        let mut examples = Vec::new();
        let mut ids = Vec::new();
        for i in 0..8u32 {
            let toks: Vec<u32> = (0..4).map(|k| 5 + ((i + k) % 12)).collect();
            examples.push(TrainingExample {
                source_ids: toks.clone(),
                question_ids: vec![5 + (i % 12), 6],
                target_ids: toks,
                answer_ids: vec![5 + (i % 12)],
                image_id: format!("img{i}"),
            });
            ids.push(format!("img{i}"));
        }
        let data: Vec<f32> = (0..8 * 4 * 6).map(|k| ((k % 13) as f32 - 6.0) * 0.1).collect();
        (examples, ImageFeatureSet::new(ids, 4, 6, data).unwrap())
    }

    fn tiny_settings() -> TrainSettings {
        TrainSettings {
            max_tokens: 32,
            max_epochs: 3,
            warmup_steps: 20,
            base_lr: 0.01,
            seed: 7,
            ..TrainSettings::default()
        }
    }

    #[test]
    fn losses_decrease_and_log_is_contiguous() {
        let (examples, features) = tiny_data();
        let model = Model::new(ModelConfig { dropout: 0.0, ..ModelConfig::tiny() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let data = TrainData { train: &examples, val: &examples, features: &features };
        let out = train(model, &data, &tiny_settings(), dir.path()).unwrap();
        assert_eq!(out.log.epochs.len(), 3);
        for (i, e) in out.log.epochs.iter().enumerate() {
            assert_eq!(e.epoch, i + 1);
        }
        assert!(out.log.epochs[2].mmt_loss < out.log.epochs[0].mmt_loss);
        assert!(list_checkpoints(&out.ckpt_dir).unwrap().len() == 3);
    }

    #[test]
    fn step_totals_compose_exactly() {
        let (examples, features) = tiny_data();
        let model = Model::new(ModelConfig { dropout: 0.1, ..ModelConfig::tiny() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let data = TrainData { train: &examples, val: &examples, features: &features };
        let out = train(model, &data, &tiny_settings(), dir.path()).unwrap();
        for s in &out.log.steps {
            assert!((s.total_loss - (s.mmt_loss + 0.3 * s.vqa_loss)).abs() < 1e-7);
        }
    }

    #[test]
    fn frozen_validation_stops_after_exactly_patience_more_epochs() {
        let (examples, features) = tiny_data();
        let model = Model::new(ModelConfig { dropout: 0.0, ..ModelConfig::tiny() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let data = TrainData { train: &examples, val: &examples, features: &features };
        let settings = TrainSettings {
            max_epochs: 100,
            patience: 4,
            val_score_override: Some(1.0),
            ..tiny_settings()
        };
        let out = train(model, &data, &settings, dir.path()).unwrap();
        // epoch 1 sets the best score; epochs 2..5 fail to improve
        assert_eq!(out.log.epochs.len(), 1 + 4);
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let (examples, features) = tiny_data();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let config = ModelConfig { dropout: 0.2, ..ModelConfig::tiny() };
        let data = TrainData { train: &examples, val: &examples, features: &features };
        let a = train(Model::new(config.clone()).unwrap(), &data, &tiny_settings(), dir1.path())
            .unwrap();
        let b =
            train(Model::new(config).unwrap(), &data, &tiny_settings(), dir2.path()).unwrap();
        assert_eq!(a.log.epochs, b.log.epochs);
        assert_eq!(a.log.steps, b.log.steps);
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn lambda_zero_starves_the_answer_branch_of_gradient() {
        let (examples, features) = tiny_data();
        let config =
            ModelConfig { vqa_loss_weight: 0.0, dropout: 0.0, ..ModelConfig::tiny() };
        let model = Model::new(config).unwrap();
        let ex = &examples[0];
        let feats = features.get(&ex.image_id).unwrap();
        let mut pass = model.forward_pass(ex, &feats, &mut ForwardMode::eval()).unwrap();
        let root = pass.combined_loss(1.0 / pass.mmt_tokens as f64, 0.0);
        let grads = pass.gradients(root);
        let vqa_out = &grads["branch.vqa.decoder.out_proj.w"];
        assert!(vqa_out.iter().all(|&g| g == 0.0));
        let mmt_out = &grads["branch.mmt.decoder.out_proj.w"];
        assert!(mmt_out.iter().any(|&g| g != 0.0));
        // and the shared encoder still learns from the translation loss
        assert!(grads["text_encoder.embed.table"].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn ring_buffer_keeps_only_the_last_k_checkpoints() {
        let (examples, features) = tiny_data();
        let model = Model::new(ModelConfig { dropout: 0.0, ..ModelConfig::tiny() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let data = TrainData { train: &examples, val: &examples, features: &features };
        let settings =
            TrainSettings { max_epochs: 7, keep_checkpoints: 3, ..tiny_settings() };
        let out = train(model, &data, &settings, dir.path()).unwrap();
        let kept: Vec<usize> = list_checkpoints(&out.ckpt_dir).unwrap().into_iter().map(|(n, _)| n).collect();
        assert_eq!(kept, vec![5, 6, 7]);
    }

    #[test]
    fn csv_roundtrip() {
        let log = TrainLog {
            epochs: vec![EpochRecord { epoch: 1, mmt_loss: 2.5, vqa_loss: 1.25, val_score: 2.75, lr: 0.001 }],
            steps: vec![],
        };
        let rows = TrainLog::parse_csv(&log.to_csv()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0], log.epochs[0]);
    }
}
