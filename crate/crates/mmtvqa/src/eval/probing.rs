//! The masked-word probing harness: mask critical entities in the source,
//! translate, and check whether the model recovered the masked word's
//! translation from the image.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probed entity category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeCategory {
    Color,
    Character,
}

/// Scoring mode: exact reference word, or any listed variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbingMode {
    Restricted,
    Relaxed,
}

/// Which words get masked and what counts as recovering them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbingSpec {
    pub category: ProbeCategory,
    pub mask_token: String,
    /// Source-language words to mask.
    pub lexicon: BTreeSet<String>,
    /// Per masked word, the acceptable target-language words for relaxed
    /// scoring. Keys must be lexicon members.
    pub variants: BTreeMap<String, BTreeSet<String>>,
}

impl ProbingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lexicon.is_empty() {
            return Err(Error::ProbingSpec("lexicon is empty".into()));
        }
        for key in self.variants.keys() {
            if !self.lexicon.contains(key) {
                return Err(Error::ProbingSpec(format!(
                    "variants key {key:?} is not in the lexicon"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let spec: ProbingSpec = serde_json::from_str(&text)
            .map_err(|e| Error::ProbingSpec(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("spec serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Replace every lexicon token with the mask token. Returns the masked
/// tokens and the original words in order.
pub fn mask_source(tokens: &[String], spec: &ProbingSpec) -> (Vec<String>, Vec<String>) {
    let mut masked = Vec::with_capacity(tokens.len());
    let mut originals = Vec::new();
    for tok in tokens {
        if spec.lexicon.contains(tok) {
            originals.push(tok.clone());
            masked.push(spec.mask_token.clone());
        } else {
            masked.push(tok.clone());
        }
    }
    (masked, originals)
}

/// One masked evaluation item: the words that were masked and, aligned with
/// them, the reference translations the hypothesis should contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedExample {
    pub masked_words: Vec<String>,
    pub reference_words: Vec<String>,
}

impl MaskedExample {
    pub fn validate(&self) -> Result<()> {
        if self.masked_words.len() != self.reference_words.len() {
            return Err(Error::Alignment {
                context: "masked words vs reference words".into(),
                left: self.masked_words.len(),
                right: self.reference_words.len(),
            });
        }
        Ok(())
    }
}

/// Fraction of masked slots recovered by the hypotheses.
///
/// Restricted: the slot's exact reference word appears in the hypothesis.
/// Relaxed: the reference word or any variant of the masked word appears,
/// so relaxed accuracy is never below restricted.
pub fn probing_accuracy(
    hypotheses: &[Vec<String>],
    examples: &[MaskedExample],
    spec: &ProbingSpec,
    mode: ProbingMode,
) -> Result<f64> {
    if hypotheses.len() != examples.len() {
        return Err(Error::Alignment {
            context: "hypotheses vs masked examples".into(),
            left: hypotheses.len(),
            right: examples.len(),
        });
    }
    spec.validate()?;
    let mut hits = 0usize;
    let mut slots = 0usize;
    for (hyp, ex) in hypotheses.iter().zip(examples) {
        ex.validate()?;
        for (masked, reference) in ex.masked_words.iter().zip(&ex.reference_words) {
            slots += 1;
            let exact = hyp.iter().any(|t| t == reference);
            let hit = match mode {
                ProbingMode::Restricted => exact,
                ProbingMode::Relaxed => {
                    let variants = spec.variants.get(masked).ok_or_else(|| {
                        Error::ProbingSpec(format!("no variants entry for masked word {masked:?}"))
                    })?;
                    exact || hyp.iter().any(|t| variants.contains(t))
                }
            };
            if hit {
                hits += 1;
            }
        }
    }
    if slots == 0 {
        return Err(Error::Argument("no masked slots to score".into()));
    }
    Ok(hits as f64 / slots as f64)
}
