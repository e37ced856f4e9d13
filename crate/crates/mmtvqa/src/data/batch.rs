//! Assembling aligned training examples and packing them into token-budget
//! batches.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::corpus::CorpusSplit;
use crate::data::features::ImageFeatureSet;
use crate::data::tokenize::Tokenize;
use crate::data::vocab::Vocabulary;
use crate::data::vqa::QaPair;
use crate::error::{Error, Result};

/// One fully tokenized example: the three inputs and the two labels.
///
/// Source and question ids share the text vocabulary; target and answer ids
/// live in their own vocabularies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub source_ids: Vec<u32>,
    pub question_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
    pub answer_ids: Vec<u32>,
    pub image_id: String,
}

impl TrainingExample {
    /// Cost charged against the batch token budget.
    pub fn cost(&self) -> usize {
        self.source_ids.len().max(self.target_ids.len())
    }
}

/// Vocabularies for the three token spaces.
#[derive(Debug, Clone)]
pub struct VocabSet {
    pub text: Vocabulary,
    pub target: Vocabulary,
    pub answer: Vocabulary,
}

/// Tokenize and align a corpus split with its question-answer pairs and
/// image features. Pairs align to corpus rows positionally.
pub fn align_examples<T: Tokenize>(
    split: &CorpusSplit,
    pairs: &[QaPair],
    features: &ImageFeatureSet,
    vocabs: &VocabSet,
    tokenizer: &T,
) -> Result<Vec<TrainingExample>> {
    if pairs.len() != split.len() {
        return Err(Error::Alignment {
            context: format!("corpus {:?} vs qa pairs", split.name),
            left: split.len(),
            right: pairs.len(),
        });
    }
    let mut examples = Vec::with_capacity(split.len());
    for (i, pair) in pairs.iter().enumerate() {
        let image_id = &split.image_ids[i];
        if !features.contains(image_id) {
            return Err(Error::Validation(format!(
                "row {}: image id {image_id:?} not found in feature set",
                i + 1
            )));
        }
        let ex = TrainingExample {
            source_ids: encode_nonempty(tokenizer, &split.sources[i], &vocabs.text, i, "source")?,
            question_ids: encode_nonempty(tokenizer, &pair.question, &vocabs.text, i, "question")?,
            target_ids: encode_nonempty(tokenizer, &split.targets[i], &vocabs.target, i, "target")?,
            answer_ids: encode_nonempty(tokenizer, &pair.answer, &vocabs.answer, i, "answer")?,
            image_id: image_id.clone(),
        };
        examples.push(ex);
    }
    Ok(examples)
}

/// Masked fine-tuning: replace lexicon tokens in a fraction of examples'
/// sources with the `<mask>` id, leaving targets intact. Selection is
/// per-example and deterministic per seed.
pub fn mask_lexicon_sources(
    examples: &mut [TrainingExample],
    lexicon_ids: &std::collections::HashSet<u32>,
    rate: f64,
    seed: u64,
) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for ex in examples.iter_mut() {
        if rng.gen_range(0.0..1.0) >= rate {
            continue;
        }
        for id in ex.source_ids.iter_mut() {
            if lexicon_ids.contains(id) {
                *id = crate::data::vocab::MASK;
            }
        }
    }
}

/// Examples for evaluation-only flows where no question-answer file
/// exists: the question mirrors the source and the answer is a
/// placeholder. Translation and scoring never read those fields.
pub fn align_eval_examples<T: Tokenize>(
    split: &CorpusSplit,
    features: &ImageFeatureSet,
    vocabs: &VocabSet,
    tokenizer: &T,
) -> Result<Vec<TrainingExample>> {
    let placeholder: Vec<QaPair> = (0..split.len())
        .map(|i| {
            QaPair::new(crate::data::vqa::QaType::None, &split.sources[i], &split.sources[i]).at(i)
        })
        .collect();
    align_examples(split, &placeholder, features, vocabs, tokenizer)
}

fn encode_nonempty<T: Tokenize>(
    tokenizer: &T,
    text: &str,
    vocab: &Vocabulary,
    row: usize,
    field: &str,
) -> Result<Vec<u32>> {
    let tokens = tokenizer.tokenize(text);
    if tokens.is_empty() {
        return Err(Error::Validation(format!("row {}: empty {field} after tokenization", row + 1)));
    }
    Ok(vocab.encode(&tokens))
}

/// Shuffle deterministically by seed, then greedily pack examples so each
/// batch's summed `max(|source|, |target|)` stays within `max_tokens`.
/// Returns batches of indices into `examples`; every index appears once.
pub fn make_batches(
    examples: &[TrainingExample],
    max_tokens: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    for (i, ex) in examples.iter().enumerate() {
        if ex.cost() > max_tokens {
            return Err(Error::Capacity { index: i, needed: ex.cost(), budget: max_tokens });
        }
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut batches = Vec::new();
    let mut batch = Vec::new();
    let mut used = 0usize;
    for idx in order {
        let cost = examples[idx].cost();
        if used + cost > max_tokens && !batch.is_empty() {
            batches.push(std::mem::take(&mut batch));
            used = 0;
        }
        used += cost;
        batch.push(idx);
    }
    if !batch.is_empty() {
        batches.push(batch);
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(len: usize) -> TrainingExample {
        TrainingExample {
            source_ids: vec![5; len],
            question_ids: vec![5; 3],
            target_ids: vec![5; len],
            answer_ids: vec![5; 1],
            image_id: "img".into(),
        }
    }

    #[test]
    fn packs_within_budget() {
        let examples: Vec<_> = (0..4).map(|_| example(10)).collect();
        let batches = make_batches(&examples, 20, 0).unwrap();
        assert_eq!(batches.len(), 2);
        for b in &batches {
            assert_eq!(b.len(), 2);
            let cost: usize = b.iter().map(|&i| examples[i].cost()).sum();
            assert!(cost <= 20);
        }
    }

    #[test]
    fn same_seed_same_batches() {
        let examples: Vec<_> = (1..20).map(|i| example(1 + i % 7)).collect();
        let a = make_batches(&examples, 16, 42).unwrap();
        let b = make_batches(&examples, 16, 42).unwrap();
        assert_eq!(a, b);
        let c = make_batches(&examples, 16, 43).unwrap();
        assert_ne!(a, c, "different seeds should reorder (overwhelmingly likely)");
    }

    #[test]
    fn oversized_example_is_capacity_error() {
        let examples = vec![example(5), example(30)];
        match make_batches(&examples, 20, 0) {
            Err(Error::Capacity { index: 1, needed: 30, budget: 20 }) => {}
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn batches_partition_the_example_set() {
        let examples: Vec<_> = (0..57).map(|i| example(1 + (i * 13) % 11)).collect();
        for seed in [0u64, 7, 999] {
            let batches = make_batches(&examples, 24, seed).unwrap();
            let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
            seen.sort_unstable();
            let expect: Vec<usize> = (0..examples.len()).collect();
            assert_eq!(seen, expect);
        }
    }

    proptest::proptest! {
        /// For any corpus and seed, concatenating the batches reproduces
        /// the example multiset exactly and no batch exceeds the budget.
        #[test]
        fn partition_property(
            lens in proptest::collection::vec(1usize..12, 1..120),
            seed in 0u64..500,
        ) {
            let examples: Vec<_> = lens.iter().map(|&l| example(l)).collect();
            let budget = 16;
            let batches = make_batches(&examples, budget, seed).unwrap();
            let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
            seen.sort_unstable();
            let expect: Vec<usize> = (0..examples.len()).collect();
            proptest::prop_assert_eq!(seen, expect);
            for b in &batches {
                let cost: usize = b.iter().map(|&i| examples[i].cost()).sum();
                proptest::prop_assert!(cost <= budget);
            }
        }
    }
}
