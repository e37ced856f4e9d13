//! Scoring and the analysis harness: corpus BLEU, masked-word probing,
//! data-side ablations, subset builders, and loss-curve plotting.

pub mod ablation;
pub mod bleu;
pub mod plot;
pub mod probing;
pub mod subsets;

pub use ablation::{confuse_images, shuffle_incongruent, substitute_question_with_source, ShuffleMode};
pub use bleu::corpus_bleu;
pub use plot::{plot_loss_file, render_loss_svg};
pub use probing::{
    mask_source, probing_accuracy, MaskedExample, ProbeCategory, ProbingMode, ProbingSpec,
};
pub use subsets::{
    build_con_subset, identify_confusing_words, pos_subset, split_by_hard_words,
    split_by_sentence_length, LengthCluster, HARD_WORD_THRESHOLD,
};

/// One evaluation's summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub split: String,
    pub bleu: f64,
    pub n_sentences: usize,
    /// Free-form ablation metadata (confusion rate, shuffle mode, seed).
    pub metadata: Vec<(String, String)>,
}
