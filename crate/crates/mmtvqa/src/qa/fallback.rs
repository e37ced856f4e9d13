//! Deterministic rule-based pair synthesis.
//!
//! Stands in for a live completion backend so the whole generation pipeline
//! runs hermetically. Rules fire in priority order (color, number,
//! character, noun) and every synthesized pair passes validation against
//! its source by construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::tokenize::tokenize;
use crate::data::vqa::{QaPair, QaType};
use crate::error::{Error, Result};
use crate::qa::validate::{digit_form, is_stopword};

const COLORS: [&str; 16] = [
    "red", "blue", "green", "yellow", "orange", "purple", "pink", "brown", "black", "white",
    "gray", "grey", "golden", "silver", "beige", "tan",
];

/// Small animate-noun lexicon for Character questions.
const ANIMATE: [&str; 22] = [
    "man", "woman", "boy", "girl", "child", "children", "men", "women", "person", "people",
    "player", "dog", "cat", "worker", "lady", "guy", "kid", "kids", "baby", "toddler",
    "toddlers", "bride",
];

fn is_number_token(tok: &str) -> bool {
    tok.chars().all(|c| c.is_ascii_digit()) || digit_form(tok).is_some()
}

fn is_content(tok: &str) -> bool {
    tok.chars().any(|c| c.is_alphabetic()) && !is_stopword(tok)
}

/// First content token after position `i`, if any; used as the question's
/// head noun.
fn head_noun_after(tokens: &[String], i: usize) -> Option<&str> {
    tokens[i + 1..].iter().find(|t| is_content(t)).map(|s| s.as_str())
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Synthesize one pair from the source alone.
///
/// The seed breaks ties when several tokens trigger the same rule, keeping
/// the output deterministic per (source, seed).
pub fn fallback_generate(source: &str, seed: u64) -> Result<QaPair> {
    let tokens = tokenize(source);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let colors: Vec<usize> =
        (0..tokens.len()).filter(|&i| COLORS.contains(&tokens[i].as_str())).collect();
    if !colors.is_empty() {
        let i = colors[rng.gen_range(0..colors.len())];
        let noun = head_noun_after(&tokens, i).unwrap_or("object");
        return Ok(QaPair::new(
            QaType::Color,
            format!("What color is the {noun}?"),
            format!("{}.", capitalize(&tokens[i])),
        ));
    }

    let numbers: Vec<usize> =
        (0..tokens.len()).filter(|&i| is_number_token(&tokens[i])).collect();
    if !numbers.is_empty() {
        let i = numbers[rng.gen_range(0..numbers.len())];
        let noun = head_noun_after(&tokens, i).unwrap_or("items");
        return Ok(QaPair::new(
            QaType::Number,
            format!("How many {noun} are there?"),
            format!("{}.", capitalize(&tokens[i])),
        ));
    }

    let animates: Vec<usize> =
        (0..tokens.len()).filter(|&i| ANIMATE.contains(&tokens[i].as_str())).collect();
    if !animates.is_empty() {
        let i = animates[rng.gen_range(0..animates.len())];
        return Ok(QaPair::new(
            QaType::Character,
            "Who is in the scene?".to_string(),
            format!("{}.", capitalize(&tokens[i])),
        ));
    }

    // last noun-like token
    if let Some(i) = (0..tokens.len()).rev().find(|&i| is_content(&tokens[i])) {
        return Ok(QaPair::new(
            QaType::Noun,
            "What is mentioned in the scene?".to_string(),
            format!("{}.", capitalize(&tokens[i])),
        ));
    }

    Err(Error::Synthesis(format!("no question-worthy token in source {source:?}")))
}
