//! The data-side ablation toolkit on a quickly trained toy model: BLEU
//! under increasing image-confusion rates, incongruent question/answer
//! shuffles, and question-to-source substitution.
//!
//! Usage:
//!   cargo run --release --example ablations

use mmtvqa::data::tokenize;
use mmtvqa::error::Result;
use mmtvqa::eval::{
    confuse_images, corpus_bleu, shuffle_incongruent, substitute_question_with_source, ShuffleMode,
};
use mmtvqa::model::{greedy_translate, Model, ModelConfig};
use mmtvqa::synth::{build_vocabs, copy_corpus, features_of, to_examples};
use mmtvqa::train::{train, TrainData, TrainSettings};

fn main() -> Result<()> {
    let corpus = copy_corpus("train", 48, 4, 8, 5)?;
    let vocabs = build_vocabs(&corpus.split, &corpus.pairs, 1)?;
    let examples = to_examples(&corpus, &vocabs)?;

    let config = ModelConfig {
        d_model: 32,
        ffn_dim: 64,
        n_heads: 2,
        encoder_layers: 2,
        decoder_layers: 2,
        dropout: 0.1,
        d_v: corpus.features.feature_dim,
        n_patches: corpus.features.n_patches,
        text_vocab: vocabs.text.len(),
        target_vocab: vocabs.target.len(),
        answer_vocab: vocabs.answer.len(),
        seed: 5,
        ..ModelConfig::default()
    };
    let settings = TrainSettings {
        max_tokens: 128,
        max_epochs: 20,
        patience: 20,
        warmup_steps: 50,
        seed: 5,
        ..TrainSettings::default()
    };
    let out = tempfile::tempdir().expect("tempdir");
    let data = TrainData { train: &examples, val: &examples, features: &corpus.features };
    println!("training a toy model ({} sentences, {} epochs)...", examples.len(), settings.max_epochs);
    let outcome = train(Model::new(config)?, &data, &settings, out.path())?;
    let model = outcome.model;

    let references: Vec<String> =
        corpus.split.targets.iter().map(|t| tokenize(t).join(" ")).collect();
    let translate_all = |set: &[mmtvqa::data::TrainingExample]| -> Result<Vec<String>> {
        set.iter()
            .map(|ex| {
                let feats = features_of(&corpus.features, &ex.image_id)?;
                let ids = greedy_translate(&model, &ex.source_ids, &feats, 16)?;
                Ok(vocabs.target.decode(&ids).join(" "))
            })
            .collect()
    };

    println!("\nrate,bleu");
    for rate in [0.0, 0.1, 0.2, 0.3, 0.4] {
        let confused = confuse_images(&examples, &corpus.features, rate, 11)?;
        let bleu = corpus_bleu(&translate_all(&confused)?, &references)?;
        println!("{rate},{bleu:.2}");
    }

    // the training-data transforms behind the incongruent and
    // question-substitution rows
    let wrong_answers = shuffle_incongruent(&examples, ShuffleMode::Answer, 11)?;
    let wrong_questions = shuffle_incongruent(&examples, ShuffleMode::Question, 11)?;
    let question_as_source = substitute_question_with_source(&examples);
    println!("\nincongruent answers: {} examples, zero fixed points", wrong_answers.len());
    println!("incongruent questions: {} examples, zero fixed points", wrong_questions.len());
    println!(
        "question->source substitution: questions now mirror sources ({} examples)",
        question_as_source.len()
    );
    Ok(())
}
