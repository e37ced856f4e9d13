//! Parsing backend completions in the Type/Question/Answer format.
//!
//! Parsing is label-keyed rather than line-positional: fields may appear in
//! any order, labels match case-insensitively, and surrounding whitespace is
//! tolerated.

use crate::data::vqa::{QaPair, QaType};
use crate::error::{Error, Result};

/// Extract the three labeled fields from a completion.
pub fn parse_response(text: &str) -> Result<QaPair> {
    let mut qa_type: Option<&str> = None;
    let mut question: Option<&str> = None;
    let mut answer: Option<&str> = None;
    for line in text.lines() {
        let line = line.trim();
        if let Some((label, value)) = line.split_once(':') {
            let value = value.trim();
            match label.trim().to_lowercase().as_str() {
                "type" => qa_type.get_or_insert(value),
                "question" => question.get_or_insert(value),
                "answer" => answer.get_or_insert(value),
                _ => continue,
            };
        }
    }
    let missing = |field: &str| Error::GenerationFormat {
        message: format!("missing {field} field"),
        raw: text.to_string(),
    };
    let type_str = qa_type.ok_or_else(|| missing("Type"))?;
    let question = question.ok_or_else(|| missing("Question"))?;
    let answer = answer.ok_or_else(|| missing("Answer"))?;
    let qa_type = QaType::parse(type_str).ok_or_else(|| Error::GenerationFormat {
        message: format!("unknown answer type {type_str:?}"),
        raw: text.to_string(),
    })?;
    if question.is_empty() || answer.is_empty() {
        return Err(Error::GenerationFormat {
            message: "empty question or answer".into(),
            raw: text.to_string(),
        });
    }
    Ok(QaPair::new(qa_type, question, answer))
}

/// Render a pair in the canonical three-line completion format.
pub fn render_response(pair: &QaPair) -> String {
    format!("Type: {}\nQuestion: {}\nAnswer: {}", pair.qa_type, pair.question, pair.answer)
}

/// Answer text with one trailing period removed, for source matching.
pub fn answer_sans_period(answer: &str) -> &str {
    answer.trim().strip_suffix('.').unwrap_or(answer.trim())
}
