//! Data-side ablations: mismatched question/answer pairs, questions
//! replaced by the source, and image confusion.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::batch::TrainingExample;
use crate::data::features::ImageFeatureSet;
use crate::error::{Error, Result};

/// Which field the incongruent shuffle permutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShuffleMode {
    Answer,
    Question,
}

/// Sattolo's algorithm: a uniformly random cyclic permutation, which by
/// construction has no fixed points.
fn derangement(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..i);
        perm.swap(i, j);
    }
    perm
}

/// Permute the selected field by a derangement: every example ends up with
/// some other example's question (or answer). Deterministic per seed.
pub fn shuffle_incongruent(
    examples: &[TrainingExample],
    mode: ShuffleMode,
    seed: u64,
) -> Result<Vec<TrainingExample>> {
    if examples.len() < 2 {
        return Err(Error::Impossibility(
            "cannot derange fewer than 2 examples; every 1-element permutation has a fixed point"
                .into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perm = derangement(examples.len(), &mut rng);
    let mut out = examples.to_vec();
    for (i, &src) in perm.iter().enumerate() {
        match mode {
            ShuffleMode::Answer => out[i].answer_ids = examples[src].answer_ids.clone(),
            ShuffleMode::Question => out[i].question_ids = examples[src].question_ids.clone(),
        }
    }
    Ok(out)
}

/// Replace every question with the example's own source.
pub fn substitute_question_with_source(examples: &[TrainingExample]) -> Vec<TrainingExample> {
    examples
        .iter()
        .map(|ex| TrainingExample { question_ids: ex.source_ids.clone(), ..ex.clone() })
        .collect()
}

/// Reassign exactly `floor(rate * n)` examples to a uniformly chosen
/// *different* image. Selection and replacements are deterministic per
/// seed; `rate` 0 returns the input untouched.
pub fn confuse_images(
    examples: &[TrainingExample],
    features: &ImageFeatureSet,
    rate: f64,
    seed: u64,
) -> Result<Vec<TrainingExample>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Argument(format!("confusion rate {rate} outside [0, 1]")));
    }
    let k = (rate * examples.len() as f64).floor() as usize;
    if k == 0 {
        return Ok(examples.to_vec());
    }
    if features.ids.len() < 2 {
        return Err(Error::Impossibility(
            "image confusion needs at least 2 distinct images".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..examples.len()).collect();
    indices.shuffle(&mut rng);
    indices.truncate(k);

    let mut out = examples.to_vec();
    for &i in &indices {
        let replacement = loop {
            let candidate = &features.ids[rng.gen_range(0..features.ids.len())];
            if candidate != &examples[i].image_id {
                break candidate.clone();
            }
        };
        out[i].image_id = replacement;
    }
    Ok(out)
}
