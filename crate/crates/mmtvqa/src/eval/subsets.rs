//! Test-set subsetting: confusing-word membership, long-word and
//! sentence-length splits, and part-of-speech filters.

use std::collections::BTreeSet;

use crate::data::corpus::CorpusSplit;
use crate::data::tokenize::tokenize;
use crate::error::{Error, Result};
use crate::qa::backend::GenerationBackend;

/// Ask a completion backend which words of each sentence need the picture
/// to disambiguate, pooling the answers into one word set.
///
/// The prompt ends with a `Source:` line and the reply is parsed
/// label-keyed (a `Words:` line, or the answer field of a
/// question-answer-style reply), so the offline mock backend works too.
/// Only words actually present in the sentence are kept.
pub fn identify_confusing_words(
    backend: &dyn GenerationBackend,
    sentences: &[String],
) -> Result<BTreeSet<String>> {
    let mut words = BTreeSet::new();
    for sentence in sentences {
        let prompt = format!(
            "Read the passage below as the description of a photograph. List the words \
             that a translator could not translate confidently without seeing the \
             photograph. Reply with one line in the form `Words: w1, w2`.\n\n\
             Source: {sentence}"
        );
        let response = backend.complete(&prompt, 0.0)?;
        let sentence_tokens: BTreeSet<String> = tokenize(sentence).into_iter().collect();
        let candidates: Vec<String> = response
            .lines()
            .filter_map(|line| {
                let line = line.trim();
                let (label, value) = line.split_once(':')?;
                match label.trim().to_lowercase().as_str() {
                    "words" | "answer" => Some(tokenize(value)),
                    _ => None,
                }
            })
            .flatten()
            .collect();
        for w in candidates {
            if sentence_tokens.contains(&w) {
                words.insert(w);
            }
        }
    }
    Ok(words)
}

/// Rows whose source contains at least one of the given words, in order.
pub fn build_con_subset(split: &CorpusSplit, confusing_words: &BTreeSet<String>) -> Result<CorpusSplit> {
    if confusing_words.is_empty() {
        return Err(Error::Argument("confusing word set is empty".into()));
    }
    let indices: Vec<usize> = (0..split.len())
        .filter(|&i| tokenize(&split.sources[i]).iter().any(|t| confusing_words.contains(t)))
        .collect();
    let mut subset = split.select(&indices);
    subset.name = format!("{}-con", split.name);
    Ok(subset)
}

/// Default word-length threshold: the 97th percentile of corpus word
/// lengths in the analysis this splits for.
pub const HARD_WORD_THRESHOLD: usize = 9;

/// Split by presence of a word longer than `threshold` characters.
/// Returns (with hard words, without).
pub fn split_by_hard_words(
    split: &CorpusSplit,
    threshold: usize,
) -> Result<(CorpusSplit, CorpusSplit)> {
    if threshold < 1 {
        return Err(Error::Argument("threshold must be >= 1".into()));
    }
    let mut hard = Vec::new();
    let mut easy = Vec::new();
    for i in 0..split.len() {
        let has_long = tokenize(&split.sources[i]).iter().any(|t| t.chars().count() > threshold);
        if has_long {
            hard.push(i);
        } else {
            easy.push(i);
        }
    }
    let mut with_hard = split.select(&hard);
    with_hard.name = format!("{}-hard-words", split.name);
    let mut without = split.select(&easy);
    without.name = format!("{}-easy-words", split.name);
    Ok((with_hard, without))
}

/// Cluster assignment from [`split_by_sentence_length`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthCluster {
    Short,
    Long,
}

/// 1-D 2-means over source token counts. In one dimension the optimal
/// 2-clustering is a threshold partition in sorted order, so the exact
/// minimum-variance split is found by sweeping the n-1 thresholds with
/// prefix sums. Deterministic (ties take the smaller short cluster), and
/// the result is stable under any single-point reassignment, which a
/// Lloyd iteration from min/max centroids does not guarantee.
pub fn split_by_sentence_length(split: &CorpusSplit) -> Result<Vec<LengthCluster>> {
    if split.len() < 2 {
        return Err(Error::Argument("need at least 2 sentences to cluster".into()));
    }
    let lengths: Vec<f64> = split.sources.iter().map(|s| tokenize(s).len() as f64).collect();
    let min = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = lengths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Err(Error::Degenerate("all sentence lengths identical".into()));
    }

    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&a, &b| lengths[a].total_cmp(&lengths[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| lengths[i]).collect();

    let mut prefix = vec![0.0];
    let mut prefix_sq = vec![0.0];
    for &x in &sorted {
        prefix.push(prefix.last().unwrap() + x);
        prefix_sq.push(prefix_sq.last().unwrap() + x * x);
    }
    // within-cluster sum of squares of sorted[a..b]
    let sse = |a: usize, b: usize| -> f64 {
        let n = (b - a) as f64;
        let sum = prefix[b] - prefix[a];
        (prefix_sq[b] - prefix_sq[a]) - sum * sum / n
    };

    let n = sorted.len();
    let mut best_k = 1;
    let mut best_cost = f64::INFINITY;
    for k in 1..n {
        let cost = sse(0, k) + sse(k, n);
        if cost < best_cost - 1e-12 {
            best_cost = cost;
            best_k = k;
        }
    }

    let mut assign = vec![LengthCluster::Short; n];
    for (rank, &idx) in order.iter().enumerate() {
        assign[idx] = if rank < best_k { LengthCluster::Short } else { LengthCluster::Long };
    }
    Ok(assign)
}

/// Sentences containing at least one token tagged `tag`. `tag_lines` holds
/// one line per sentence of space-separated per-token tags.
pub fn pos_subset(split: &CorpusSplit, tag_lines: &[String], tag: &str) -> Result<CorpusSplit> {
    if tag_lines.len() != split.len() {
        return Err(Error::Alignment {
            context: "corpus vs tag file".into(),
            left: split.len(),
            right: tag_lines.len(),
        });
    }
    let mut indices = Vec::new();
    for (i, line) in tag_lines.iter().enumerate() {
        let tokens = tokenize(&split.sources[i]);
        let tags: Vec<&str> = line.split_whitespace().collect();
        if tags.len() != tokens.len() {
            return Err(Error::Alignment {
                context: format!("row {}: tokens vs tags", i + 1),
                left: tokens.len(),
                right: tags.len(),
            });
        }
        if tags.contains(&tag) {
            indices.push(i);
        }
    }
    let mut subset = split.select(&indices);
    subset.name = format!("{}-pos-{}", split.name, tag.to_lowercase());
    Ok(subset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(sources: &[&str]) -> CorpusSplit {
        CorpusSplit::new(
            "test",
            sources.iter().map(|s| s.to_string()).collect(),
            sources.iter().map(|s| s.to_uppercase()).collect(),
            (0..sources.len()).map(|i| format!("img{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn con_subset_keeps_matching_rows_in_order() {
        let s = split(&["a river bank", "a cat sleeps", "the bank opens"]);
        let words: BTreeSet<String> = ["bank".to_string()].into();
        let con = build_con_subset(&s, &words).unwrap();
        assert_eq!(con.len(), 2);
        assert_eq!(con.sources, vec!["a river bank", "the bank opens"]);
        // partition: subset plus complement re-cover the split
        let complement: Vec<&String> =
            s.sources.iter().filter(|x| !con.sources.contains(x)).collect();
        assert_eq!(con.len() + complement.len(), s.len());
    }

    #[test]
    fn empty_intersection_gives_empty_subset() {
        let s = split(&["a cat", "a dog"]);
        let words: BTreeSet<String> = ["zebra".to_string()].into();
        assert!(build_con_subset(&s, &words).unwrap().is_empty());
    }

    #[test]
    fn hard_word_split_uses_character_length() {
        let s = split(&["an extraordinary view", "a short walk"]);
        let (hard, easy) = split_by_hard_words(&s, HARD_WORD_THRESHOLD).unwrap();
        assert_eq!(hard.sources, vec!["an extraordinary view"]);
        assert_eq!(easy.sources, vec!["a short walk"]);
        assert_eq!(hard.len() + easy.len(), s.len());
    }

    #[test]
    fn nine_character_words_are_not_hard_at_the_default_threshold() {
        let s = split(&["a wonderful day"]); // "wonderful" has 9 chars
        let (hard, easy) = split_by_hard_words(&s, HARD_WORD_THRESHOLD).unwrap();
        assert!(hard.is_empty());
        assert_eq!(easy.len(), 1);
    }

    #[test]
    fn well_separated_lengths_cluster_cleanly() {
        let s = split(&[
            "a b c",
            "a b c d",
            "a b c d e f g h i j k l m n o p q r s t",
            "a b c d e f g h i j k l m n o p q r s t u v",
        ]);
        let assign = split_by_sentence_length(&s).unwrap();
        assert_eq!(
            assign,
            vec![
                LengthCluster::Short,
                LengthCluster::Short,
                LengthCluster::Long,
                LengthCluster::Long
            ]
        );
        assert_eq!(split_by_sentence_length(&s).unwrap(), assign, "deterministic");
    }

    #[test]
    fn identical_lengths_are_degenerate() {
        let s = split(&["a b", "c d", "e f"]);
        assert!(matches!(split_by_sentence_length(&s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn converged_assignment_is_locally_optimal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let sentences: Vec<String> = (0..40)
            .map(|_| vec!["w"; rng.gen_range(2..30)].join(" "))
            .collect();
        let refs: Vec<&str> = sentences.iter().map(|s| s.as_str()).collect();
        let s = split(&refs);
        let assign = split_by_sentence_length(&s).unwrap();
        let lengths: Vec<f64> = s.sources.iter().map(|x| tokenize(x).len() as f64).collect();
        let cost = |assign: &[LengthCluster]| -> f64 {
            let mut total = 0.0;
            for cluster in [LengthCluster::Short, LengthCluster::Long] {
                let xs: Vec<f64> = lengths
                    .iter()
                    .zip(assign)
                    .filter(|(_, &a)| a == cluster)
                    .map(|(&l, _)| l)
                    .collect();
                if xs.is_empty() {
                    continue;
                }
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                total += xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            }
            total
        };
        let base = cost(&assign);
        // no single reassignment may lower the within-cluster variance
        for i in 0..assign.len() {
            let mut flipped = assign.clone();
            flipped[i] = match flipped[i] {
                LengthCluster::Short => LengthCluster::Long,
                LengthCluster::Long => LengthCluster::Short,
            };
            assert!(cost(&flipped) >= base - 1e-9, "swap at {i} improved the clustering");
        }
    }

    #[test]
    fn backend_driven_word_identification_feeds_the_subset() {
        use crate::qa::backend::MockBackend;
        let s = split(&["a man in a blue shirt", "the dog sleeps on the grass"]);
        let words = identify_confusing_words(&MockBackend::new(0), &s.sources).unwrap();
        assert!(!words.is_empty());
        for w in &words {
            assert!(
                s.sources.iter().any(|src| tokenize(src).contains(w)),
                "{w:?} not from any sentence"
            );
        }
        // the pooled set is usable directly as a con-subset filter
        let con = build_con_subset(&s, &words).unwrap();
        assert!(!con.is_empty());
    }

    #[test]
    fn explicit_words_line_is_parsed_and_filtered() {
        use crate::qa::backend::ScriptedBackend;
        let s = split(&["a man rows a boat"]);
        let backend = ScriptedBackend::new(vec![Ok("Words: rows, boat, zeppelin".into())]);
        let words = identify_confusing_words(&backend, &s.sources).unwrap();
        assert!(words.contains("rows") && words.contains("boat"));
        assert!(!words.contains("zeppelin"), "words absent from the sentence are dropped");
    }

    #[test]
    fn pos_subset_selects_tagged_sentences() {
        let s = split(&["a blue shirt", "a dog runs"]);
        let tags = vec!["DT JJ NN".to_string(), "DT NN VBZ".to_string()];
        let jj = pos_subset(&s, &tags, "JJ").unwrap();
        assert_eq!(jj.sources, vec!["a blue shirt"]);
        let nns = pos_subset(&s, &tags, "NNS").unwrap();
        assert!(nns.is_empty());
    }

    #[test]
    fn misaligned_tags_are_rejected() {
        let s = split(&["a blue shirt"]);
        let tags = vec!["DT JJ".to_string()];
        assert!(matches!(pos_subset(&s, &tags, "JJ"), Err(Error::Alignment { .. })));
    }
}
