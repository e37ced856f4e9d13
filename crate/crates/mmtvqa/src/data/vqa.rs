//! Question-answer pairs in the Type-Question-Answer format: tab-separated
//! rows aligned positionally with the training corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// The closed set of answer types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QaType {
    Noun,
    Character,
    Color,
    Number,
    None,
}

impl QaType {
    pub const ALL: [QaType; 5] =
        [QaType::Noun, QaType::Character, QaType::Color, QaType::Number, QaType::None];

    pub fn parse(s: &str) -> Option<QaType> {
        match s.trim().to_lowercase().as_str() {
            "noun" => Some(QaType::Noun),
            "character" => Some(QaType::Character),
            "color" => Some(QaType::Color),
            "number" => Some(QaType::Number),
            "none" => Some(QaType::None),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            QaType::Noun => "Noun",
            QaType::Character => "Character",
            QaType::Color => "Color",
            QaType::Number => "Number",
            QaType::None => "None",
        }
    }
}

impl fmt::Display for QaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One generated question-answer record, tied to its corpus row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    pub qa_type: QaType,
    pub question: String,
    pub answer: String,
    pub source_index: usize,
}

impl QaPair {
    pub fn new(qa_type: QaType, question: impl Into<String>, answer: impl Into<String>) -> Self {
        QaPair { qa_type, question: question.into(), answer: answer.into(), source_index: 0 }
    }

    pub fn at(mut self, source_index: usize) -> Self {
        self.source_index = source_index;
        self
    }
}

/// Parse a `type<TAB>question<TAB>answer` file, one row per corpus sentence.
pub fn load_vqa_pairs(path: &Path) -> Result<Vec<QaPair>> {
    let lines = crate::data::corpus::read_lines(path)?;
    let mut pairs = Vec::with_capacity(lines.len());
    for (row, line) in lines.iter().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Format(format!(
                "row {}: expected 3 tab-separated columns, found {}",
                row + 1,
                cols.len()
            )));
        }
        let qa_type = QaType::parse(cols[0]).ok_or_else(|| Error::Parse {
            row: row + 1,
            message: format!("unknown answer type {:?}", cols[0]),
        })?;
        if cols[1].trim().is_empty() || cols[2].trim().is_empty() {
            return Err(Error::Parse {
                row: row + 1,
                message: "question and answer must be non-empty".into(),
            });
        }
        pairs.push(QaPair {
            qa_type,
            question: cols[1].to_string(),
            answer: cols[2].to_string(),
            source_index: row,
        });
    }
    Ok(pairs)
}

/// Write pairs as the 3-column TSV consumed by [`load_vqa_pairs`].
pub fn save_vqa_pairs(path: &Path, pairs: &[QaPair]) -> Result<()> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(p.qa_type.as_str());
        out.push('\t');
        out.push_str(&p.question);
        out.push('\t');
        out.push_str(&p.answer);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Count pairs per answer type. Types absent from the input count zero.
pub fn answer_type_stats(pairs: &[QaPair]) -> BTreeMap<QaType, usize> {
    let mut counts: BTreeMap<QaType, usize> = QaType::ALL.iter().map(|&t| (t, 0)).collect();
    for p in pairs {
        *counts.get_mut(&p.qa_type).unwrap() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_canonical_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        std::fs::write(&p, "Color\tWhat color is the man's shirt?\tBlue.\n").unwrap();
        let pairs = load_vqa_pairs(&p).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].qa_type, QaType::Color);
        assert_eq!(pairs[0].answer, "Blue.");
        assert_eq!(pairs[0].source_index, 0);
    }

    #[test]
    fn type_is_case_insensitive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        std::fs::write(&p, "cHarACter\tWho is here?\tGirl.\n").unwrap();
        assert_eq!(load_vqa_pairs(&p).unwrap()[0].qa_type, QaType::Character);
    }

    #[test]
    fn unknown_type_is_parse_error_with_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        std::fs::write(&p, "Noun\tWhat?\tBushes.\nVerb\tWhat?\tRuns.\n").unwrap();
        match load_vqa_pairs(&p) {
            Err(Error::Parse { row: 2, .. }) => {}
            other => panic!("expected parse error at row 2, got {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        std::fs::write(&p, "Noun\tonly two columns\n").unwrap();
        assert!(matches!(load_vqa_pairs(&p), Err(Error::Format(_))));
    }

    #[test]
    fn stats_sum_to_length_and_missing_types_are_zero() {
        let pairs = vec![
            QaPair::new(QaType::Color, "q?", "Blue."),
            QaPair::new(QaType::Color, "q?", "Red."),
        ];
        let stats = answer_type_stats(&pairs);
        assert_eq!(stats[&QaType::Color], 2);
        assert_eq!(stats[&QaType::Noun], 0);
        assert_eq!(stats.values().sum::<usize>(), pairs.len());
        assert!(answer_type_stats(&[]).values().all(|&c| c == 0));
    }

    #[test]
    fn save_then_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        let pairs = vec![
            QaPair::new(QaType::Number, "How many dogs?", "Two.").at(0),
            QaPair::new(QaType::None, "What is it?", "Rope.").at(1),
        ];
        save_vqa_pairs(&p, &pairs).unwrap();
        assert_eq!(load_vqa_pairs(&p).unwrap(), pairs);
    }
}
