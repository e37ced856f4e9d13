//! Run the full pipeline end to end on the bundled 64-sentence synthetic
//! corpus: question generation with the mock backend, joint training,
//! checkpoint averaging, translation, and scoring.
//!
//! Usage:
//!   cargo run --release --example smoke_pipeline -- [out_dir] [epochs]

use std::path::PathBuf;

use mmtvqa::smoke::{end_to_end_smoke, SmokeOptions};

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/smoke64")
}

fn main() -> mmtvqa::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let out = PathBuf::from(args.get(1).map(String::as_str).unwrap_or("smoke_out"));
    let epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(25);

    let opts = SmokeOptions { epochs, ..SmokeOptions::default() };
    let start = std::time::Instant::now();
    let report = end_to_end_smoke(&fixtures_dir(), &out, &opts)?;
    let elapsed = start.elapsed();

    println!("examples        {}", report.n_examples);
    println!("epochs          {}", report.epochs_run);
    println!(
        "translation loss {:.4} -> {:.4}",
        report.initial_mmt_loss, report.final_mmt_loss
    );
    println!(
        "answering loss   {:.4} -> {:.4}",
        report.initial_vqa_loss, report.final_vqa_loss
    );
    println!("BLEU            {:.2}", report.bleu);
    println!("wall time       {:.1?}s", elapsed.as_secs_f64());
    println!("artifacts under {}", out.display());
    Ok(())
}
