//! Deterministic synthetic corpora.
//!
//! Two flavors: a copy-task corpus (target = source) with unstructured
//! image features, used by the smoke pipeline, and a probing corpus whose
//! images *encode the answer*: patch 0 carries a one-hot code of the
//! sentence's color word, so a model can only recover a masked color by
//! reading the image.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::batch::{align_examples, TrainingExample, VocabSet};
use crate::data::corpus::CorpusSplit;
use crate::data::features::ImageFeatureSet;
use crate::data::tokenize::{tokenize, WordTokenizer};
use crate::data::vocab::{build_vocab, MASK};
use crate::data::vqa::{QaPair, QaType};
use crate::error::Result;
use crate::eval::probing::{ProbeCategory, ProbingSpec};

pub const COLORS: [&str; 6] = ["red", "blue", "green", "yellow", "black", "white"];
const NOUNS: [&str; 12] = [
    "dog", "cat", "car", "bird", "house", "boat", "shirt", "ball", "truck", "chair", "door",
    "tree",
];
const VERBS: [&str; 6] = ["sits", "stands", "waits", "rests", "moves", "turns"];
const PREPS: [&str; 4] = ["near", "beside", "under", "behind"];
const NUMBERS: [&str; 4] = ["two", "three", "four", "five"];

/// A generated corpus with its features and question-answer pairs.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub split: CorpusSplit,
    pub features: ImageFeatureSet,
    pub pairs: Vec<QaPair>,
    /// Per-sentence color word (probing corpus only).
    pub color_of: Vec<String>,
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

/// Copy-task corpus: varied sentence shapes, target = source, random
/// features, pairs synthesized by the rule engine.
pub fn copy_corpus(name: &str, n: usize, n_patches: usize, d_v: usize, seed: u64) -> Result<SynthCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let sentence = match rng.gen_range(0..4) {
            0 => format!(
                "the {} {} {} {} the {}",
                pick(&mut rng, &COLORS),
                pick(&mut rng, &NOUNS),
                pick(&mut rng, &VERBS),
                pick(&mut rng, &PREPS),
                pick(&mut rng, &NOUNS)
            ),
            1 => format!(
                "{} {} {} {} the {}",
                pick(&mut rng, &NUMBERS),
                pick(&mut rng, &NOUNS),
                pick(&mut rng, &VERBS),
                pick(&mut rng, &PREPS),
                pick(&mut rng, &NOUNS)
            ),
            2 => format!(
                "a {} {} {} a {} {}",
                pick(&mut rng, &NOUNS),
                pick(&mut rng, &VERBS),
                pick(&mut rng, &PREPS),
                pick(&mut rng, &COLORS),
                pick(&mut rng, &NOUNS)
            ),
            _ => format!(
                "the {} {} {}",
                pick(&mut rng, &NOUNS),
                pick(&mut rng, &VERBS),
                pick(&mut rng, &PREPS),
            ),
        };
        pairs.push(crate::qa::fallback::fallback_generate(&sentence, seed ^ i as u64)?.at(i));
        sources.push(sentence);
        ids.push(format!("img_{i:05}"));
    }
    let data: Vec<f32> = (0..n * n_patches * d_v)
        .map(|_| rng.gen_range(-1.0f32..1.0))
        .collect();
    let features = ImageFeatureSet::new(ids.clone(), n_patches, d_v, data)?;
    let split = CorpusSplit::new(name, sources.clone(), sources, ids)?;
    Ok(SynthCorpus { split, features, pairs, color_of: Vec::new() })
}

/// Probing corpus: every sentence names exactly one color, drawn uniformly
/// and independently of the rest of the sentence, and the image's first
/// patch one-hot-encodes that color in its leading dimensions. The
/// remaining dimensions and patches carry loud noise, so extracting the
/// code requires a learned projection.
pub fn probe_corpus(name: &str, n: usize, seed: u64) -> Result<SynthCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_patches = 4;
    let d_v = 32;
    debug_assert!(COLORS.len() <= d_v);
    let mut sources = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    let mut pairs = Vec::with_capacity(n);
    let mut color_of = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * n_patches * d_v);
    for i in 0..n {
        let color_idx = rng.gen_range(0..COLORS.len());
        let color = COLORS[color_idx];
        let noun = pick(&mut rng, &NOUNS);
        let sentence = format!(
            "the {} {} {} {} the {}",
            color,
            noun,
            pick(&mut rng, &VERBS),
            pick(&mut rng, &PREPS),
            pick(&mut rng, &NOUNS)
        );
        pairs.push(
            QaPair::new(QaType::Color, format!("what color is the {noun} ?"), color.to_string())
                .at(i),
        );
        color_of.push(color.to_string());
        sources.push(sentence);
        ids.push(format!("img_{i:05}"));
        for patch in 0..n_patches {
            for dim in 0..d_v {
                let value = if patch == 0 {
                    if dim == color_idx {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    // distractor patches loud enough that the projection
                    // must actively isolate the color code
                    rng.gen_range(-0.5f32..0.5)
                };
                data.push(value);
            }
        }
    }
    let features = ImageFeatureSet::new(ids.clone(), n_patches, d_v, data)?;
    let split = CorpusSplit::new(name, sources.clone(), sources, ids)?;
    Ok(SynthCorpus { split, features, pairs, color_of })
}

/// Identity-variant probing spec over the synthetic color lexicon (the
/// copy task translates every word to itself).
pub fn probe_spec() -> ProbingSpec {
    let lexicon = COLORS.iter().map(|s| s.to_string()).collect();
    let variants = COLORS
        .iter()
        .map(|&c| (c.to_string(), std::iter::once(c.to_string()).collect()))
        .collect();
    ProbingSpec {
        category: ProbeCategory::Color,
        mask_token: "<mask>".into(),
        lexicon,
        variants,
    }
}

/// Shared vocabularies built over a corpus and its pairs.
pub fn build_vocabs(split: &CorpusSplit, pairs: &[QaPair], min_count: usize) -> Result<VocabSet> {
    let text_tokens: Vec<Vec<String>> = split
        .sources
        .iter()
        .map(|s| tokenize(s))
        .chain(pairs.iter().map(|p| tokenize(&p.question)))
        .collect();
    let target_tokens: Vec<Vec<String>> = split.targets.iter().map(|s| tokenize(s)).collect();
    let answer_tokens: Vec<Vec<String>> = pairs.iter().map(|p| tokenize(&p.answer)).collect();
    let text = build_vocab(text_tokens.iter().map(|t| t.as_slice()), min_count)?;
    let target = build_vocab(target_tokens.iter().map(|t| t.as_slice()), min_count)?;
    let answer = build_vocab(answer_tokens.iter().map(|t| t.as_slice()), min_count)?;
    Ok(VocabSet { text, target, answer })
}

/// Tokenize and align a synthetic corpus into training examples.
pub fn to_examples(corpus: &SynthCorpus, vocabs: &VocabSet) -> Result<Vec<TrainingExample>> {
    align_examples(&corpus.split, &corpus.pairs, &corpus.features, vocabs, &WordTokenizer)
}

/// Replace the color token of selected examples' sources with `<mask>`,
/// leaving targets intact: recovering the color then requires the image.
pub fn mask_color_sources(
    examples: &mut [TrainingExample],
    corpus: &SynthCorpus,
    vocabs: &VocabSet,
    mask_rate: f64,
    seed: u64,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, ex) in examples.iter_mut().enumerate() {
        if rng.gen_range(0.0..1.0) >= mask_rate {
            continue;
        }
        let color_id = vocabs.text.id(&corpus.color_of[i]);
        for id in ex.source_ids.iter_mut() {
            if *id == color_id {
                *id = MASK;
            }
        }
    }
}

/// Write a synthetic corpus to a directory in the conventional layout:
/// `<name>.src`, `<name>.tgt`, `<name>.ids`, `<name>.vqa.tsv`, plus
/// `features.imf` (skipped when `features_file` is None).
pub fn write_corpus_dir(
    dir: &std::path::Path,
    corpus: &SynthCorpus,
    features_file: Option<&str>,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir.display().to_string(), e))?;
    let name = &corpus.split.name;
    let write = |file: String, lines: &[String]| -> Result<()> {
        let mut text = lines.join("\n");
        text.push('\n');
        let path = dir.join(file);
        std::fs::write(&path, text).map_err(|e| crate::error::Error::io(path.display().to_string(), e))
    };
    write(format!("{name}.src"), &corpus.split.sources)?;
    write(format!("{name}.tgt"), &corpus.split.targets)?;
    write(format!("{name}.ids"), &corpus.split.image_ids)?;
    crate::data::vqa::save_vqa_pairs(&dir.join(format!("{name}.vqa.tsv")), &corpus.pairs)?;
    if let Some(file) = features_file {
        crate::data::features::write_features(&dir.join(file), &corpus.features)?;
    }
    Ok(())
}

/// Patch matrix of an example's image, widened to f64.
pub fn features_of(features: &ImageFeatureSet, image_id: &str) -> Result<Array2<f64>> {
    features.get(image_id).ok_or_else(|| {
        crate::error::Error::Validation(format!("image id {image_id:?} not in feature set"))
    })
}
