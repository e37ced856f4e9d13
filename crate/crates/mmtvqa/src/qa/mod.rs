//! Question-answer pair generation: prompt protocol, pluggable completion
//! backends, response parsing, grounding validation, and a deterministic
//! offline fallback.

pub mod backend;
pub mod fallback;
pub mod parse;
pub mod pipeline;
pub mod template;
pub mod validate;

pub use backend::{GenerationBackend, HttpBackend, MockBackend, ScriptBackend, ScriptedBackend};
pub use fallback::fallback_generate;
pub use parse::{parse_response, render_response};
pub use pipeline::{generate_pair, run_generation, write_rejection_log, Outcome};
pub use template::{build_prompt, default_template, Demonstration, PromptTemplate};
pub use validate::{validate_pair, Validation};
