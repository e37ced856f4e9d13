//! Multitask multimodal translation at desk scale.
//!
//! A shared-encoder transformer translates a source sentence while a second
//! branch answers a generated question about the paired image. Both branches
//! read the image through selective attention (text states query image
//! patches) followed by a sigmoid-gated fusion, and train jointly on
//! `L_total = L_translation + lambda * L_answering`.
//!
//! The crate covers the full loop around that model:
//!
//! - [`data`]: corpus/feature/question-file ingestion, vocabularies,
//!   token-budget batching
//! - [`qa`]: turning source sentences into question-answer pairs through a
//!   pluggable completion backend, with validation and a deterministic
//!   offline fallback
//! - [`model`]: the network itself on a small reverse-mode autodiff
//!   [`graph`], plus greedy/beam decoding and checkpoints
//! - [`train`]: label-smoothed loss, Adam with inverse-sqrt warmup,
//!   early stopping, checkpoint averaging
//! - [`eval`]: corpus BLEU, the masked-word probing harness, and the
//!   ablation toolkit (incongruent pairs, question substitution, image
//!   confusion, subset builders)
//! - [`synth`] / [`smoke`]: deterministic synthetic corpora and an
//!   end-to-end pipeline run used by the examples and the test suite
//!
//! Start with the `examples/` directory: each file is a runnable walkthrough
//! of one capability (`cargo run --release --example smoke_pipeline`, and so
//! on). The `mmtvqa` binary exposes the same operations as subcommands for
//! scripted use.

pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod qa;
pub mod runconfig;
pub mod smoke;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
