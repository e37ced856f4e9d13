//! End-to-end pipeline run over the bundled synthetic copy corpus:
//! question generation (mock backend) -> training -> checkpoint averaging
//! -> translation -> scoring. Every stage failure names the stage.

use std::path::{Path, PathBuf};

use crate::data::corpus::{load_corpus, SplitPaths};
use crate::data::features::load_image_features;
use crate::data::tokenize::WordTokenizer;
use crate::data::vqa::QaPair;
use crate::error::{Error, Result};
use crate::eval::bleu::corpus_bleu;
use crate::model::config::ModelConfig;
use crate::model::forward::Model;
use crate::model::translate::greedy_translate;
use crate::qa::backend::MockBackend;
use crate::qa::pipeline::{run_generation, write_rejection_log};
use crate::qa::template::default_template;
use crate::synth::build_vocabs;
use crate::train::average::average_checkpoints;
use crate::train::trainer::{list_checkpoints, train, StepRecord, TrainData, TrainLog, TrainSettings};

/// Knobs for the smoke run. Defaults keep the whole pipeline under a
/// couple of minutes on one core.
#[derive(Debug, Clone)]
pub struct SmokeOptions {
    pub seed: u64,
    pub epochs: usize,
    pub d_model: usize,
    pub dropout: f64,
}

impl Default for SmokeOptions {
    fn default() -> Self {
        SmokeOptions { seed: 1, epochs: 25, d_model: 32, dropout: 0.1 }
    }
}

/// What the smoke run produced. Two runs with equal options and data are
/// bitwise identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SmokeReport {
    pub n_examples: usize,
    pub epochs_run: usize,
    pub initial_mmt_loss: f64,
    pub initial_vqa_loss: f64,
    pub final_mmt_loss: f64,
    pub final_vqa_loss: f64,
    pub bleu: f64,
    pub steps: Vec<StepRecord>,
}

/// Train-settings + config used by the smoke run (exposed so tests can
/// reuse them).
pub fn smoke_settings(opts: &SmokeOptions) -> TrainSettings {
    TrainSettings {
        max_tokens: 128,
        max_epochs: opts.epochs,
        patience: opts.epochs, // fixed-length run
        keep_checkpoints: 10,
        seed: opts.seed,
        base_lr: 0.005,
        warmup_steps: 60,
        ..TrainSettings::default()
    }
}

/// Run the full pipeline over `data_dir` (conventional layout: `train.src`,
/// `train.tgt`, `train.ids`, `features.imf`), writing all artifacts under
/// `out_dir`.
pub fn end_to_end_smoke(data_dir: &Path, out_dir: &Path, opts: &SmokeOptions) -> Result<SmokeReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let split = load_corpus(&SplitPaths::in_dir(data_dir, "train"))
        .map_err(|e| Error::stage("load_corpus", e))?;
    let features = load_image_features(&data_dir.join("features.imf"))
        .map_err(|e| Error::stage("load_image_features", e))?;

    // question generation with the hermetic mock backend
    let pairs: Vec<QaPair> = (|| -> Result<Vec<QaPair>> {
        let backend = MockBackend::new(opts.seed);
        let outcomes =
            run_generation(&backend, &default_template(), &split.sources, opts.seed, 4)?;
        write_rejection_log(&out_dir.join("rejections.tsv"), &outcomes)?;
        let pairs: Vec<QaPair> =
            outcomes.iter().enumerate().map(|(i, o)| o.pair().clone().at(i)).collect();
        crate::data::vqa::save_vqa_pairs(&out_dir.join("train.vqa.tsv"), &pairs)?;
        Ok(pairs)
    })()
    .map_err(|e| Error::stage("gen_qa", e))?;

    let vocabs = build_vocabs(&split, &pairs, 1).map_err(|e| Error::stage("build_vocab", e))?;
    let examples = crate::data::batch::align_examples(
        &split,
        &pairs,
        &features,
        &vocabs,
        &WordTokenizer,
    )
    .map_err(|e| Error::stage("align_examples", e))?;

    let config = ModelConfig {
        d_model: opts.d_model,
        ffn_dim: opts.d_model * 2,
        n_heads: 2,
        encoder_layers: 2,
        decoder_layers: 2,
        dropout: opts.dropout,
        label_smoothing: 0.1,
        vqa_loss_weight: 0.3,
        d_v: features.feature_dim,
        n_patches: features.n_patches,
        text_vocab: vocabs.text.len(),
        target_vocab: vocabs.target.len(),
        answer_vocab: vocabs.answer.len(),
        seed: opts.seed,
    };
    let model = Model::new(config).map_err(|e| Error::stage("model_init", e))?;

    let settings = smoke_settings(opts);
    let data = TrainData { train: &examples, val: &examples, features: &features };
    let outcome =
        train(model, &data, &settings, out_dir).map_err(|e| Error::stage("train", e))?;
    outcome
        .log
        .save_csv(&out_dir.join("train_log.csv"))
        .map_err(|e| Error::stage("train", e))?;

    // average the retained checkpoints for inference
    let averaged = (|| -> Result<Model> {
        let ckpts: Vec<PathBuf> =
            list_checkpoints(&outcome.ckpt_dir)?.into_iter().map(|(_, p)| p).collect();
        let (config, params) = average_checkpoints(&ckpts)?;
        Model::from_parts(config, params)
    })()
    .map_err(|e| Error::stage("average_checkpoints", e))?;

    // translate the corpus back and score against the copy targets
    let hypotheses: Vec<String> = (|| -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(examples.len());
        for ex in &examples {
            let feats = crate::synth::features_of(&features, &ex.image_id)?;
            let ids = greedy_translate(&averaged, &ex.source_ids, &feats, 24)?;
            out.push(vocabs.target.decode(&ids).join(" "));
        }
        Ok(out)
    })()
    .map_err(|e| Error::stage("translate", e))?;
    std::fs::write(out_dir.join("hyp.txt"), hypotheses.join("\n") + "\n")
        .map_err(|e| Error::stage("translate", Error::io("hyp.txt", e)))?;

    let references: Vec<String> = split
        .targets
        .iter()
        .map(|t| crate::data::tokenize::tokenize(t).join(" "))
        .collect();
    let bleu =
        corpus_bleu(&hypotheses, &references).map_err(|e| Error::stage("score", e))?;

    let log: &TrainLog = &outcome.log;
    let first = log.epochs.first().expect("at least one epoch");
    let last = log.epochs.last().expect("at least one epoch");
    Ok(SmokeReport {
        n_examples: examples.len(),
        epochs_run: log.epochs.len(),
        initial_mmt_loss: first.mmt_loss,
        initial_vqa_loss: first.vqa_loss,
        final_mmt_loss: last.mmt_loss,
        final_vqa_loss: last.vqa_loss,
        bleu,
        steps: log.steps.clone(),
    })
}
