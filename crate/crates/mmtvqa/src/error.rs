//! Crate-wide error type. Variants are grouped by the surface they guard:
//! file ingestion, tensor shapes, the generation pipeline, and training.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("alignment error: {context}: {left} vs {right} lines")]
    Alignment { context: String, left: usize, right: usize },

    #[error("encoding error in {path} at line {line}: not valid UTF-8")]
    Encoding { path: String, line: usize },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("size error in {path}: expected {expected} bytes of payload, found {actual}")]
    Size { path: String, expected: u64, actual: u64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("capacity error: example {index} needs {needed} tokens but the batch budget is {budget}")]
    Capacity { index: usize, needed: usize, budget: usize },

    #[error("vocabulary error: id {id} out of range for {vocab} (size {size})")]
    Vocabulary { id: u32, vocab: String, size: usize },

    #[error("shape error: {context}: {left} vs {right}")]
    Shape { context: String, left: String, right: String },

    #[error("argument error: {0}")]
    Argument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("transport error from backend {backend}: {message}")]
    Transport { backend: String, message: String },

    #[error("generation format error: {message}; raw response: {raw:?}")]
    GenerationFormat { message: String, raw: String },

    #[error("rejected pair ({reason}): type={qa_type} question={question:?} answer={answer:?}")]
    RejectedPair { reason: String, qa_type: String, question: String, answer: String },

    #[error("synthesis error: {0}")]
    Synthesis(String),

    #[error("impossibility error: {0}")]
    Impossibility(String),

    #[error("degenerate clustering: {0}")]
    Degenerate(String),

    #[error("checkpoint incompatibility: {0}")]
    Incompatible(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}, step {step}: loss is not finite")]
    Diverged { epoch: usize, step: usize },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("probing spec error: {0}")]
    ProbingSpec(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Wrap an error with the pipeline stage that raised it.
    pub fn stage(stage: impl Into<String>, source: Error) -> Self {
        Error::Stage { stage: stage.into(), source: Box::new(source) }
    }
}
