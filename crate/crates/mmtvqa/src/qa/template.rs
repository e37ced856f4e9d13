//! Prompt construction for question-answer generation.
//!
//! A prompt renders three sections in order (task description, generation
//! requirements, demonstrations) and ends with the target source sentence
//! awaiting completion. The default template ships two demonstrations; the
//! whole template is overridable from a JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::vqa::QaType;
use crate::error::{Error, Result};

/// One worked example shown to the backend.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Demonstration {
    pub source: String,
    pub qa_type: String,
    pub question: String,
    pub answer: String,
}

/// The three prompt sections.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PromptTemplate {
    pub task_description: String,
    pub generation_requirements: Vec<String>,
    pub demonstrations: Vec<Demonstration>,
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.demonstrations.is_empty() {
            return Err(Error::Config("template needs at least one demonstration".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let t: PromptTemplate = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("template serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// The built-in two-shot template.
pub fn default_template() -> PromptTemplate {
    PromptTemplate {
        task_description: concat!(
            "You are an experienced author of reading comprehension test questions. ",
            "Read the sentence below as a short passage describing a photograph. ",
            "Write one question about the passage and answer it, choosing one of four ",
            "question types: Noun, Character, Color, or Number. ",
            "Reply in exactly three lines: Type, Question, Answer."
        )
        .to_string(),
        generation_requirements: vec![
            "Every word of the question must be grounded in the passage.".to_string(),
            "The answer must be a word or short phrase copied from the passage.".to_string(),
            "Prefer asking about a detail that an accompanying photograph would show.".to_string(),
            "Do not ask yes/no questions.".to_string(),
            "The question must end with a question mark.".to_string(),
        ],
        demonstrations: vec![
            Demonstration {
                source: "A woman in a red dress is waiting at the bus stop .".to_string(),
                qa_type: QaType::Color.as_str().to_string(),
                question: "What color is the woman's dress?".to_string(),
                answer: "Red.".to_string(),
            },
            Demonstration {
                source: "Three children are playing football on the beach .".to_string(),
                qa_type: QaType::Number.as_str().to_string(),
                question: "How many children are playing?".to_string(),
                answer: "Three.".to_string(),
            },
        ],
    }
}

/// Render the prompt for one source sentence.
pub fn build_prompt(template: &PromptTemplate, source: &str) -> Result<String> {
    if source.trim().is_empty() {
        return Err(Error::Argument("source sentence is empty".into()));
    }
    template.validate()?;
    let mut out = String::new();
    out.push_str(&template.task_description);
    out.push_str("\n\nRequirements:\n");
    for (i, req) in template.generation_requirements.iter().enumerate() {
        out.push_str(&format!("{}. {req}\n", i + 1));
    }
    out.push('\n');
    for demo in &template.demonstrations {
        out.push_str(&format!(
            "Source: {}\nType: {}\nQuestion: {}\nAnswer: {}\n\n",
            demo.source, demo.qa_type, demo.question, demo.answer
        ));
    }
    out.push_str(&format!("Source: {source}"));
    Ok(out)
}

/// Pull the final `Source:` line back out of a rendered prompt.
pub fn target_source_of_prompt(prompt: &str) -> Option<&str> {
    prompt.lines().rev().find_map(|l| l.strip_prefix("Source: ")).map(str::trim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_contains_all_sections_and_ends_with_source() {
        let t = default_template();
        let p = build_prompt(&t, "a man rides a bike .").unwrap();
        assert!(p.starts_with(&t.task_description));
        for req in &t.generation_requirements {
            assert!(p.contains(req.as_str()), "missing requirement line {req:?}");
        }
        assert_eq!(p.matches("\nType: ").count(), 2, "two demonstration blocks");
        assert!(p.ends_with("Source: a man rides a bike ."));
    }

    #[test]
    fn rendering_is_pure() {
        let t = default_template();
        assert_eq!(build_prompt(&t, "x y z").unwrap(), build_prompt(&t, "x y z").unwrap());
    }

    #[test]
    fn empty_source_is_argument_error() {
        assert!(matches!(build_prompt(&default_template(), "  "), Err(Error::Argument(_))));
    }

    #[test]
    fn target_source_extraction() {
        let p = build_prompt(&default_template(), "two dogs run .").unwrap();
        assert_eq!(target_source_of_prompt(&p), Some("two dogs run ."));
    }

    #[test]
    fn template_roundtrips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("template.json");
        let t = default_template();
        t.save(&p).unwrap();
        assert_eq!(PromptTemplate::load(&p).unwrap(), t);
    }
}
