//! Generate question-answer pairs for a handful of sentences with the
//! offline mock backend, showing the prompt, parsing, validation, and
//! rejection-logging machinery.
//!
//! Usage:
//!   cargo run --example generate_qa

use mmtvqa::qa::{build_prompt, default_template, run_generation, MockBackend};

fn main() -> mmtvqa::Result<()> {
    let sources: Vec<String> = [
        "a man in a blue shirt is standing on a ladder cleaning a window",
        "two dogs run across the snowy field",
        "a little girl climbing into a wooden playhouse",
        "the group gathers around three small tables",
        "a street vendor sells fruit under a green umbrella",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let template = default_template();
    println!("=== rendered prompt for the first sentence ===");
    println!("{}\n", build_prompt(&template, &sources[0])?);

    let backend = MockBackend::new(7);
    let outcomes = run_generation(&backend, &template, &sources, 7, 2)?;

    println!("=== generated pairs ===");
    for (source, outcome) in sources.iter().zip(&outcomes) {
        let pair = outcome.pair();
        let status = if outcome.is_accepted() { "ok      " } else { "fallback" };
        println!("[{status}] {:9} {:42} -> {}", pair.qa_type.to_string(), pair.question, pair.answer);
        println!("           source: {source}");
    }
    Ok(())
}
