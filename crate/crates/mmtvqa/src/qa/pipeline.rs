//! Driving pair generation over a corpus: prompting, parsing, validation,
//! retry, and bounded parallelism with input-order output.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::data::vqa::QaPair;
use crate::error::{Error, Result};
use crate::qa::backend::GenerationBackend;
use crate::qa::fallback::fallback_generate;
use crate::qa::parse::parse_response;
use crate::qa::template::{build_prompt, PromptTemplate};
use crate::qa::validate::validate_pair;

/// Per-source result. A rejection records why and what the backend said;
/// the pair written in its place comes from the fallback rules so the
/// output file stays aligned with the corpus.
#[derive(Debug, Clone)]
pub enum Outcome {
    Accepted(QaPair),
    Rejected { reason: String, raw_response: String, replacement: QaPair },
}

impl Outcome {
    pub fn pair(&self) -> &QaPair {
        match self {
            Outcome::Accepted(p) => p,
            Outcome::Rejected { replacement, .. } => replacement,
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, Outcome::Accepted(_))
    }
}

/// Generate one validated pair for a source sentence.
///
/// The backend is called at temperature 0; transport errors are retried
/// once. Parse and validation failures are not retried (temperature 0 would
/// reproduce them).
pub fn generate_pair(
    backend: &dyn GenerationBackend,
    template: &PromptTemplate,
    source: &str,
) -> Result<QaPair> {
    let prompt = build_prompt(template, source)?;
    let response = match backend.complete(&prompt, 0.0) {
        Ok(r) => r,
        Err(Error::Transport { .. }) => backend.complete(&prompt, 0.0)?,
        Err(e) => return Err(e),
    };
    let pair = parse_response(&response)?;
    match validate_pair(&pair, source) {
        crate::qa::validate::Validation::Accept => Ok(pair),
        crate::qa::validate::Validation::Reject(reason) => Err(Error::RejectedPair {
            reason,
            qa_type: pair.qa_type.to_string(),
            question: pair.question,
            answer: pair.answer,
        }),
    }
}

/// Generate pairs for every source, `parallelism` requests in flight at
/// once. Output order matches input order and every source yields exactly
/// one outcome; failures fall back to the rule engine and are recorded.
pub fn run_generation(
    backend: &dyn GenerationBackend,
    template: &PromptTemplate,
    sources: &[String],
    seed: u64,
    parallelism: usize,
) -> Result<Vec<Outcome>> {
    let parallelism = parallelism.max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Outcome>>>> =
        Mutex::new((0..sources.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(sources.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= sources.len() {
                    break;
                }
                let outcome = one_outcome(backend, template, &sources[i], seed, i);
                slots.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    slots.into_inner().unwrap().into_iter().map(|s| s.expect("every slot filled")).collect()
}

fn one_outcome(
    backend: &dyn GenerationBackend,
    template: &PromptTemplate,
    source: &str,
    seed: u64,
    index: usize,
) -> Result<Outcome> {
    match generate_pair(backend, template, source) {
        Ok(pair) => Ok(Outcome::Accepted(pair.at(index))),
        Err(err) => {
            let (reason, raw) = match &err {
                Error::RejectedPair { reason, answer, .. } => (reason.clone(), answer.clone()),
                Error::GenerationFormat { message, raw } => (message.clone(), raw.clone()),
                Error::Transport { message, .. } => (format!("transport: {message}"), String::new()),
                // source-level problems (e.g. empty source) are real errors
                _ => return Err(err),
            };
            let replacement = fallback_generate(source, seed)?.at(index);
            Ok(Outcome::Rejected { reason, raw_response: raw, replacement })
        }
    }
}

/// Write the rejection log: `row<TAB>reason<TAB>raw_response`, one line per
/// rejected source.
pub fn write_rejection_log(path: &Path, outcomes: &[Outcome]) -> Result<()> {
    let mut out = String::new();
    for (row, outcome) in outcomes.iter().enumerate() {
        if let Outcome::Rejected { reason, raw_response, .. } = outcome {
            let raw = raw_response.replace(['\t', '\n'], " ");
            out.push_str(&format!("{row}\t{reason}\t{raw}\n"));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::vqa::QaType;
    use crate::qa::backend::{MockBackend, ScriptedBackend};
    use crate::qa::template::default_template;

    #[test]
    fn generate_pair_accepts_valid_mock_response() {
        let backend = ScriptedBackend::new(vec![Ok(
            "Type: Color\nQuestion: What color is the man's shirt?\nAnswer: Blue.".into(),
        )]);
        let pair =
            generate_pair(&backend, &default_template(), "a man in a blue shirt .").unwrap();
        assert_eq!(pair.qa_type, QaType::Color);
    }

    #[test]
    fn gibberish_is_generation_format_error() {
        let backend = ScriptedBackend::new(vec![Ok("gibberish".into())]);
        let err = generate_pair(&backend, &default_template(), "a man .").unwrap_err();
        assert!(matches!(err, Error::GenerationFormat { .. }));
    }

    #[test]
    fn ungrounded_answer_is_rejected_pair_error() {
        let backend = ScriptedBackend::new(vec![Ok(
            "Type: Color\nQuestion: What color is it?\nAnswer: Purple.".into(),
        )]);
        let err = generate_pair(&backend, &default_template(), "a man in a blue shirt .").unwrap_err();
        match err {
            Error::RejectedPair { answer, .. } => assert_eq!(answer, "Purple."),
            other => panic!("expected rejected pair, got {other:?}"),
        }
    }

    #[test]
    fn transport_errors_get_one_retry() {
        let backend = ScriptedBackend::new(vec![
            Err(Error::Transport { backend: "scripted".into(), message: "flaky".into() }),
            Ok("Type: Noun\nQuestion: What is near?\nAnswer: Bushes.".into()),
        ]);
        let pair = generate_pair(&backend, &default_template(), "near many bushes .").unwrap();
        assert_eq!(pair.answer, "Bushes.");
    }

    #[test]
    fn pipeline_yields_one_outcome_per_source_in_order() {
        let sources: Vec<String> = (0..25)
            .map(|i| format!("{} dogs play near a blue fence .", if i % 2 == 0 { "two" } else { "three" }))
            .collect();
        let backend = MockBackend::new(3);
        let outcomes = run_generation(&backend, &default_template(), &sources, 3, 4).unwrap();
        assert_eq!(outcomes.len(), sources.len());
        for (i, o) in outcomes.iter().enumerate() {
            assert_eq!(o.pair().source_index, i);
            assert!(validate_pair(o.pair(), &sources[i]).is_accept());
        }
    }

    #[test]
    fn rejected_rows_are_replaced_by_fallback_and_logged() {
        let sources = vec!["a man in a blue shirt .".to_string()];
        let backend = ScriptedBackend::new(vec![Ok("nonsense".into())]);
        let outcomes = run_generation(&backend, &default_template(), &sources, 0, 1).unwrap();
        assert_eq!(outcomes.len(), 1);
        assert!(!outcomes[0].is_accepted());
        assert!(validate_pair(outcomes[0].pair(), &sources[0]).is_accept());

        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("rejections.tsv");
        write_rejection_log(&log, &outcomes).unwrap();
        let text = std::fs::read_to_string(&log).unwrap();
        assert!(text.starts_with("0\t"));
        assert!(text.contains("nonsense"));
    }
}
