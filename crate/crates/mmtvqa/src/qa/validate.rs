//! Acceptance rules for generated pairs: answers must originate from the
//! source sentence.

use crate::data::tokenize::tokenize;
use crate::data::vqa::QaPair;
use crate::qa::parse::answer_sans_period;

/// Function words ignored when checking answer grounding.
const STOPWORDS: [&str; 28] = [
    "a", "an", "the", "and", "or", "of", "in", "on", "at", "with", "is", "are", "was", "were",
    "to", "for", "his", "her", "its", "their", "some", "many", "by", "from", "up", "down", "near",
    "it",
];

/// Spelled-out numbers and their digit forms; an answer word may match the
/// source through this table.
const NUMBER_WORDS: [(&str, &str); 20] = [
    ("one", "1"),
    ("two", "2"),
    ("three", "3"),
    ("four", "4"),
    ("five", "5"),
    ("six", "6"),
    ("seven", "7"),
    ("eight", "8"),
    ("nine", "9"),
    ("ten", "10"),
    ("eleven", "11"),
    ("twelve", "12"),
    ("thirteen", "13"),
    ("fourteen", "14"),
    ("fifteen", "15"),
    ("sixteen", "16"),
    ("seventeen", "17"),
    ("eighteen", "18"),
    ("nineteen", "19"),
    ("twenty", "20"),
];

/// Outcome of validating a pair; rejection is a value, not an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Accept,
    Reject(String),
}

impl Validation {
    pub fn is_accept(&self) -> bool {
        matches!(self, Validation::Accept)
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Validation::Accept => None,
            Validation::Reject(r) => Some(r),
        }
    }
}

pub fn digit_form(word: &str) -> Option<&'static str> {
    NUMBER_WORDS.iter().find(|(w, _)| *w == word).map(|&(_, d)| d)
}

/// Shared with the fallback rules so synthesized answers are never built
/// from words validation would discard.
pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

/// Accept iff the question ends with `?` and every content word of the
/// answer occurs in the source (case-insensitively), allowing a spelled-out
/// number to match its digit form.
pub fn validate_pair(pair: &QaPair, source: &str) -> Validation {
    if !pair.question.trim().ends_with('?') {
        return Validation::Reject("question does not end with ?".into());
    }
    let source_tokens = tokenize(source);
    let answer_tokens = tokenize(answer_sans_period(&pair.answer));
    let content: Vec<&String> =
        answer_tokens.iter().filter(|t| !is_stopword(t) && t.chars().any(|c| c.is_alphanumeric())).collect();
    if content.is_empty() {
        return Validation::Reject("answer has no content words".into());
    }
    for word in content {
        let in_source = source_tokens.iter().any(|t| t == word)
            || digit_form(word).is_some_and(|d| source_tokens.iter().any(|t| t == d));
        if !in_source {
            return Validation::Reject(format!("answer word {word:?} not in source"));
        }
    }
    Validation::Accept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::vqa::{QaPair, QaType};

    #[test]
    fn accepts_answer_found_in_source() {
        let pair = QaPair::new(QaType::Noun, "What are the males near?", "Bushes.");
        let source = "Two young , white males are outside near many bushes.";
        assert!(validate_pair(&pair, source).is_accept());
    }

    #[test]
    fn accepts_number_word_via_digit_form() {
        let pair = QaPair::new(QaType::Number, "How many women are on the team?", "Fourteen.");
        let source = "A sports team made up of 14 women waring white t-shirt and pink tags .";
        assert!(validate_pair(&pair, source).is_accept());
        // the digit spelling also matches directly
        let digit = QaPair::new(QaType::Number, "How many women?", "14.");
        assert!(validate_pair(&digit, source).is_accept());
    }

    #[test]
    fn rejects_answer_absent_from_source() {
        let pair = QaPair::new(QaType::Color, "What color is the shirt?", "Purple.");
        let v = validate_pair(&pair, "a man in a blue shirt .");
        assert_eq!(v, Validation::Reject("answer word \"purple\" not in source".into()));
    }

    #[test]
    fn rejects_question_without_question_mark() {
        let pair = QaPair::new(QaType::Noun, "Tell me about the bushes", "Bushes.");
        assert!(!validate_pair(&pair, "near many bushes .").is_accept());
    }

    #[test]
    fn multiword_answers_check_each_content_word() {
        let source = "A beautiful bride walking on a sidewalk with her new husband .";
        let ok = QaPair::new(QaType::Character, "Who is walking?", "Bride and husband.");
        assert!(validate_pair(&ok, source).is_accept());
        let bad = QaPair::new(QaType::Character, "Who is walking?", "Bride and groom.");
        assert!(!validate_pair(&bad, source).is_accept());
    }

    #[test]
    fn stopword_only_answer_is_rejected() {
        let pair = QaPair::new(QaType::Noun, "What is it?", "The.");
        assert!(!validate_pair(&pair, "the dog runs .").is_accept());
    }
}
