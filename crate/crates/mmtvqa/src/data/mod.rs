//! Data pipeline: corpus ingestion, question-answer pair files, image
//! feature files, vocabularies, tokenization, and batching.

pub mod batch;
pub mod corpus;
pub mod features;
pub mod tokenize;
pub mod vocab;
pub mod vqa;

pub use batch::{align_eval_examples, align_examples, make_batches, TrainingExample, VocabSet};
pub use corpus::{load_corpus, CorpusSplit, SplitPaths};
pub use features::{load_image_features, write_features, ImageFeatureSet};
pub use tokenize::{detokenize, tokenize, Tokenize, WordTokenizer};
pub use vocab::{build_vocab, Vocabulary, BOS, EOS, MASK, PAD, UNK};
pub use vqa::{answer_type_stats, load_vqa_pairs, save_vqa_pairs, QaPair, QaType};
