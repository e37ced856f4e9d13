//! Corpus BLEU-4 with brevity penalty.
//!
//! Precision counts are clipped per sentence and pooled over the corpus.
//! Orders 2-4 use add-one smoothing so short desk-scale references do not
//! zero out the geometric mean; order 1 is unsmoothed, so sharing no
//! unigram with the reference still scores 0.

use std::collections::HashMap;

use crate::error::{Error, Result};

const MAX_ORDER: usize = 4;

fn ngram_counts<'a>(tokens: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU in [0, 100] over whitespace-tokenized lines.
pub fn corpus_bleu(hypotheses: &[String], references: &[String]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::Alignment {
            context: "hypotheses vs references".into(),
            left: hypotheses.len(),
            right: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(Error::Argument("cannot score an empty corpus".into()));
    }
    let mut matched = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;

    for (hyp, reference) in hypotheses.iter().zip(references) {
        let h: Vec<&str> = hyp.split_whitespace().collect();
        let r: Vec<&str> = reference.split_whitespace().collect();
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let hyp_ngrams = ngram_counts(&h, n);
            let ref_ngrams = ngram_counts(&r, n);
            for (ngram, &count) in &hyp_ngrams {
                total[n - 1] += count;
                matched[n - 1] += count.min(ref_ngrams.get(ngram).copied().unwrap_or(0));
            }
        }
    }

    let mut log_precision_sum = 0.0;
    for n in 1..=MAX_ORDER {
        let (m, t) = (matched[n - 1] as f64, total[n - 1] as f64);
        let p = if n == 1 {
            if t == 0.0 {
                return Err(Error::Argument("hypotheses contain no tokens".into()));
            }
            m / t
        } else {
            (m + 1.0) / (t + 1.0)
        };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_precision_sum += p.ln() / MAX_ORDER as f64;
    }

    let bp = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * log_precision_sum.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_corpora_score_exactly_100() {
        let refs = lines(&["the cat sat on the mat", "a dog runs", "one two three four five"]);
        assert_eq!(corpus_bleu(&refs, &refs).unwrap(), 100.0);
    }

    #[test]
    fn disjoint_unigrams_score_zero() {
        let hyp = lines(&["x y z"]);
        let reference = lines(&["a b c"]);
        assert_eq!(corpus_bleu(&hyp, &reference).unwrap(), 0.0);
    }

    #[test]
    fn hand_worked_three_vs_four_tokens() {
        // hyp "the cat sat" vs ref "the cat sat down":
        // p1 = 3/3, p2 = (2+1)/(2+1), p3 = (1+1)/(1+1), p4 = (0+1)/(0+1),
        // BP = exp(1 - 4/3)
        let hyp = lines(&["the cat sat"]);
        let reference = lines(&["the cat sat down"]);
        let expect = 100.0 * (1.0f64 - 4.0 / 3.0).exp();
        assert!((corpus_bleu(&hyp, &reference).unwrap() - expect).abs() < 1e-6);
    }

    #[test]
    fn clipping_caps_repeated_ngrams() {
        // "the the the" vs "the cat": p1 = 1/3 after clipping
        let hyp = lines(&["the the the"]);
        let reference = lines(&["the cat"]);
        let p1: f64 = 1.0 / 3.0;
        let smoothed = (0.0f64 + 1.0) / (2.0 + 1.0); // two bigrams, no matches
        let trigram = (0.0f64 + 1.0) / (1.0 + 1.0); // one trigram, no match
        let p4 = 1.0f64; // no 4-grams: 0/0 smooths to 1/1
        let geo = (p1.ln() + smoothed.ln() + trigram.ln() + p4.ln()) / 4.0;
        let bp = 1.0f64; // hyp len 3 > ref len 2
        let expect = 100.0 * bp * geo.exp();
        assert!((corpus_bleu(&hyp, &reference).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn permutation_invariant_under_paired_reordering() {
        let hyp = lines(&["a b c", "d e f g", "h i"]);
        let reference = lines(&["a b d", "d e f f", "h j"]);
        let base = corpus_bleu(&hyp, &reference).unwrap();
        let hyp2 = lines(&["h i", "a b c", "d e f g"]);
        let ref2 = lines(&["h j", "a b d", "d e f f"]);
        assert_eq!(base, corpus_bleu(&hyp2, &ref2).unwrap());
    }

    #[test]
    fn length_mismatch_is_alignment_error() {
        assert!(matches!(
            corpus_bleu(&lines(&["a"]), &lines(&["a", "b"])),
            Err(Error::Alignment { .. })
        ));
    }
}
