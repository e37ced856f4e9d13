//! Generate a synthetic copy-task dataset in the conventional layout the
//! `train` subcommand expects: train/val splits, question-answer pairs,
//! and an image feature file.
//!
//! Usage:
//!   cargo run --example generate_data -- [out_dir] [n_train] [seed]

use mmtvqa::synth::{copy_corpus, write_corpus_dir};

fn main() -> mmtvqa::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let out = std::path::PathBuf::from(args.get(1).map(String::as_str).unwrap_or("synth_data"));
    let n_train: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(64);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);

    let train = copy_corpus("train", n_train, 4, 8, seed)?;
    write_corpus_dir(&out, &train, Some("features.imf"))?;

    // validation reuses the train images so one feature file serves both
    let mut val = copy_corpus("val", (n_train / 4).max(2), 4, 8, seed ^ 0xa1)?;
    val.split.image_ids =
        (0..val.split.len()).map(|i| train.split.image_ids[i % n_train].clone()).collect();
    write_corpus_dir(&out, &val, None)?;

    println!(
        "wrote {} train / {} val sentences to {}",
        train.split.len(),
        val.split.len(),
        out.display()
    );
    Ok(())
}
