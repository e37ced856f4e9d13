//! Command-line entry point. Every subcommand is a thin wrapper over the
//! library; see the crate examples for the same flows as annotated code.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmtvqa::data::{
    align_eval_examples, align_examples, load_corpus, load_image_features, load_vqa_pairs,
    save_vqa_pairs, tokenize, CorpusSplit, ImageFeatureSet, QaPair, SplitPaths, TrainingExample,
    VocabSet, Vocabulary, WordTokenizer,
};
use mmtvqa::error::{Error, Result};
use mmtvqa::eval::{
    build_con_subset, confuse_images, corpus_bleu, mask_source, plot_loss_file, pos_subset,
    probing_accuracy, shuffle_incongruent, split_by_hard_words, split_by_sentence_length,
    EvalReport, LengthCluster, MaskedExample, ProbingMode, ProbingSpec, ShuffleMode,
    HARD_WORD_THRESHOLD,
};
use mmtvqa::model::{
    beam_translate, greedy_translate, load_checkpoint, save_checkpoint, Model,
};
use mmtvqa::qa::{
    default_template, run_generation, write_rejection_log, GenerationBackend, HttpBackend,
    MockBackend, PromptTemplate, ScriptBackend,
};
use mmtvqa::runconfig::RunConfig;
use mmtvqa::synth::build_vocabs;
use mmtvqa::train::{average_checkpoints, list_checkpoints, train, TrainData};

#[derive(Parser)]
#[command(
    name = "mmtvqa",
    about = "Multitask multimodal translation: train, translate, generate question data, and run the analysis harness",
    arg_required_else_help = true,
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a data directory (train/val splits + features).
    Train(TrainArgs),
    /// Translate a source file with a trained run.
    Translate(TranslateArgs),
    /// Score a hypothesis file against references (corpus BLEU).
    Score(ScoreArgs),
    /// Generate question-answer pairs for a corpus.
    GenQa(GenQaArgs),
    /// Print answer-type statistics of a pairs file.
    Stats(StatsArgs),
    /// Masked-word probing accuracy of a trained run.
    Probe(ProbeArgs),
    /// BLEU under increasing image-confusion rates (CSV `rate,bleu`).
    AblateConfusion(AblateConfusionArgs),
    /// Retrain with shuffled question/answer fields (CSV `mode,bleu`).
    AblateIncongruent(AblateIncongruentArgs),
    /// Build evaluation subsets (confusing words, word length, sentence
    /// length, part of speech).
    Subset(SubsetArgs),
    /// Average checkpoints into a new checkpoint directory.
    AvgCkpt(AvgCkptArgs),
    /// Render a training-log CSV as an SVG loss chart.
    PlotLoss(PlotLossArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Directory with train.{src,tgt,ids}, train.vqa.tsv, val.{src,tgt,ids},
    /// val.vqa.tsv and features.imf
    #[arg(long)]
    data_dir: PathBuf,
    /// Output directory for checkpoints, vocabularies and logs
    #[arg(long)]
    out: PathBuf,
    /// Configuration file (`key = value`); defaults are the standard recipe
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TranslateArgs {
    /// A train run directory (resolves checkpoint and vocabularies)
    #[arg(long)]
    run: PathBuf,
    /// Explicit checkpoint directory (default: ckpt_avg, else last epoch)
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    src: PathBuf,
    /// Image id file aligned with the sources
    #[arg(long)]
    ids: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Output hypothesis file
    #[arg(long)]
    out: PathBuf,
    /// Maximum target length (default: the run's effective config)
    #[arg(long)]
    max_len: Option<usize>,
    /// Beam width, 1 = greedy (default: the run's effective config)
    #[arg(long)]
    beam: Option<usize>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
}

#[derive(Args)]
struct GenQaArgs {
    /// Source sentence file, one per line
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_parser = ["mock", "script", "http"])]
    backend: String,
    /// Prompt template JSON (default: the built-in two-shot template)
    #[arg(long)]
    template: Option<PathBuf>,
    /// Output TSV (type<TAB>question<TAB>answer, one row per sentence)
    #[arg(long)]
    out: PathBuf,
    /// Concurrent backend requests
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Command for the script backend (prompt on stdin, completion on stdout)
    #[arg(long)]
    script_cmd: Option<String>,
    /// Rejection log TSV (default: <out>.rejections.tsv)
    #[arg(long)]
    reject_log: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    vqa: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    ids: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Probing spec JSON (category, mask token, lexicon, variants)
    #[arg(long)]
    spec: PathBuf,
    /// Per-sentence reference translations of the masked words
    /// (space-separated, aligned with masking order)
    #[arg(long)]
    refs: PathBuf,
    #[arg(long, default_value_t = 64)]
    max_len: usize,
}

#[derive(Args)]
struct AblateConfusionArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    ids: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Comma-separated confusion rates, e.g. 0,0.1,0.2,0.3,0.4
    #[arg(long, value_delimiter = ',')]
    rates: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    max_len: usize,
}

#[derive(Args)]
struct AblateIncongruentArgs {
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated: none, answer, question
    #[arg(long, value_delimiter = ',', default_values_t = vec!["none".to_string(), "answer".to_string(), "question".to_string()])]
    modes: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 64)]
    max_len: usize,
}

#[derive(Args)]
struct SubsetArgs {
    #[arg(long, value_parser = ["con", "hard-words", "length", "pos"])]
    kind: String,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    ids: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Split name used in output file names
    #[arg(long, default_value = "test")]
    name: String,
    /// Confusing-word list, one per line (kind = con)
    #[arg(long)]
    words: Option<PathBuf>,
    /// Or identify confusing words with a backend (kind = con)
    #[arg(long, value_parser = ["mock", "script", "http"])]
    backend: Option<String>,
    /// Command for the script backend
    #[arg(long)]
    script_cmd: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Word-length threshold (kind = hard-words)
    #[arg(long, default_value_t = HARD_WORD_THRESHOLD)]
    threshold: usize,
    /// Per-token tag file, one line per sentence (kind = pos)
    #[arg(long)]
    tags: Option<PathBuf>,
    /// Tag to select (kind = pos)
    #[arg(long)]
    tag: Option<String>,
}

#[derive(Args)]
struct AvgCkptArgs {
    /// Explicit checkpoint directories
    #[arg(long, value_delimiter = ',')]
    ckpts: Vec<PathBuf>,
    /// Or: a run directory, averaging the last N retained checkpoints
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    last: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotLossArgs {
    /// train_log.csv produced by `train`
    #[arg(long)]
    log: PathBuf,
    /// Output SVG path
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Translate(args) => cmd_translate(args),
        Command::Score(args) => cmd_score(args),
        Command::GenQa(args) => cmd_gen_qa(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Probe(args) => cmd_probe(args),
        Command::AblateConfusion(args) => cmd_ablate_confusion(args),
        Command::AblateIncongruent(args) => cmd_ablate_incongruent(args),
        Command::Subset(args) => cmd_subset(args),
        Command::AvgCkpt(args) => cmd_avg_ckpt(args),
        Command::PlotLoss(args) => cmd_plot_loss(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(1)
        }
    }
}

fn read_lines_file(path: &Path) -> Result<Vec<String>> {
    mmtvqa::data::corpus::read_lines(path)
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

/// Vocabulary file names inside a run directory.
const VOCAB_FILES: [(&str, &str); 3] =
    [("text", "text.vocab"), ("target", "target.vocab"), ("answer", "answer.vocab")];

fn save_vocabs(dir: &Path, vocabs: &VocabSet) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    vocabs.text.save(&dir.join(VOCAB_FILES[0].1))?;
    vocabs.target.save(&dir.join(VOCAB_FILES[1].1))?;
    vocabs.answer.save(&dir.join(VOCAB_FILES[2].1))?;
    Ok(())
}

fn load_vocabs(dir: &Path) -> Result<VocabSet> {
    Ok(VocabSet {
        text: Vocabulary::load(&dir.join(VOCAB_FILES[0].1))?,
        target: Vocabulary::load(&dir.join(VOCAB_FILES[1].1))?,
        answer: Vocabulary::load(&dir.join(VOCAB_FILES[2].1))?,
    })
}

/// The run's persisted effective configuration, or defaults when the run
/// predates one.
fn run_effective_config(run: &Path) -> RunConfig {
    RunConfig::load(&run.join("effective.cfg")).unwrap_or_default()
}

/// Resolve a run directory into a model and its vocabularies: an explicit
/// checkpoint wins, then `ckpt_avg`, then the newest retained epoch.
fn load_run(run: &Path, ckpt: Option<&PathBuf>) -> Result<(Model, VocabSet)> {
    let ckpt_dir = match ckpt {
        Some(p) => p.clone(),
        None => {
            let avg = run.join("ckpt_avg");
            if avg.join("manifest.json").exists() {
                avg
            } else {
                let all = list_checkpoints(&run.join("ckpt"))?;
                all.last()
                    .map(|(_, p)| p.clone())
                    .ok_or_else(|| Error::Argument(format!("no checkpoints under {}", run.display())))?
            }
        }
    };
    let (config, params) = load_checkpoint(&ckpt_dir)?;
    let model = Model::from_parts(config, params)?;
    let vocabs = load_vocabs(&run.join("vocabs"))?;
    Ok((model, vocabs))
}

fn load_eval_data(
    src: &Path,
    tgt: Option<&Path>,
    ids: &Path,
    features: &Path,
) -> Result<(CorpusSplit, ImageFeatureSet)> {
    let sources = read_lines_file(src)?;
    let targets = match tgt {
        Some(t) => read_lines_file(t)?,
        None => sources.clone(),
    };
    let image_ids = read_lines_file(ids)?;
    let split = CorpusSplit::new("eval", sources, targets, image_ids)?;
    let features = load_image_features(features)?;
    Ok((split, features))
}

fn translate_examples(
    model: &Model,
    examples: &[TrainingExample],
    features: &ImageFeatureSet,
    vocabs: &VocabSet,
    max_len: usize,
    beam: usize,
) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        let feats = mmtvqa::synth::features_of(features, &ex.image_id)?;
        let ids = if beam > 1 {
            beam_translate(model, &ex.source_ids, &feats, max_len, beam)?
        } else {
            greedy_translate(model, &ex.source_ids, &feats, max_len)?
        };
        out.push(vocabs.target.decode(&ids).join(" "));
    }
    Ok(out)
}

fn write_text(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config = load_config(args.config.as_ref(), args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(args.out.display().to_string(), e))?;
    config.save(&args.out.join("effective.cfg"))?;

    let train_split = load_corpus(&SplitPaths::in_dir(&args.data_dir, "train"))?;
    let val_split = load_corpus(&SplitPaths::in_dir(&args.data_dir, "val"))?;
    let train_pairs = load_vqa_pairs(&args.data_dir.join("train.vqa.tsv"))?;
    let val_pairs = load_vqa_pairs(&args.data_dir.join("val.vqa.tsv"))?;
    let features = load_image_features(&args.data_dir.join("features.imf"))?;

    let vocabs = build_vocabs(&train_split, &train_pairs, config.min_count)?;
    save_vocabs(&args.out.join("vocabs"), &vocabs)?;

    let tokenizer = WordTokenizer;
    let mut train_examples =
        align_examples(&train_split, &train_pairs, &features, &vocabs, &tokenizer)?;
    let val_examples = align_examples(&val_split, &val_pairs, &features, &vocabs, &tokenizer)?;

    if config.train_mask_rate > 0.0 {
        let words = read_lines_file(Path::new(&config.mask_lexicon))?;
        let lexicon_ids: std::collections::HashSet<u32> = words
            .iter()
            .filter(|w| vocabs.text.contains(w))
            .map(|w| vocabs.text.id(w))
            .collect();
        mmtvqa::data::batch::mask_lexicon_sources(
            &mut train_examples,
            &lexicon_ids,
            config.train_mask_rate,
            config.seed ^ 0x6d61736b,
        );
    }

    let model_config = config.model_config(
        features.feature_dim,
        features.n_patches,
        vocabs.text.len(),
        vocabs.target.len(),
        vocabs.answer.len(),
    );
    let model = Model::new(model_config)?;
    let data = TrainData { train: &train_examples, val: &val_examples, features: &features };
    let outcome = train(model, &data, &config.train_settings(), &args.out)?;
    outcome.log.save_csv(&args.out.join("train_log.csv"))?;

    let ckpts: Vec<PathBuf> = list_checkpoints(&outcome.ckpt_dir)?
        .into_iter()
        .rev()
        .take(config.average_last)
        .map(|(_, p)| p)
        .collect();
    let (avg_config, avg_params) = average_checkpoints(&ckpts)?;
    save_checkpoint(&args.out.join("ckpt_avg"), &avg_config, &avg_params)?;

    let last = outcome.log.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs: mmt_loss {:.4}, vqa_loss {:.4}, val {:.4}",
        last.epoch, last.mmt_loss, last.vqa_loss, last.val_score
    );
    println!("averaged last {} checkpoints into {}", ckpts.len(), args.out.join("ckpt_avg").display());
    Ok(())
}

fn cmd_translate(args: TranslateArgs) -> Result<()> {
    let (model, vocabs) = load_run(&args.run, args.ckpt.as_ref())?;
    let run_config = run_effective_config(&args.run);
    let max_len = args.max_len.unwrap_or(run_config.max_len);
    let beam = args.beam.unwrap_or(run_config.beam_size);
    let (split, features) = load_eval_data(&args.src, None, &args.ids, &args.features)?;
    let examples = align_eval_examples(&split, &features, &vocabs, &WordTokenizer)?;
    let hyps = translate_examples(&model, &examples, &features, &vocabs, max_len, beam)?;
    write_text(&args.out, &hyps)?;
    println!("translated {} sentences into {}", hyps.len(), args.out.display());
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let hyp: Vec<String> =
        read_lines_file(&args.hyp)?.iter().map(|l| tokenize(l).join(" ")).collect();
    let reference: Vec<String> =
        read_lines_file(&args.reference)?.iter().map(|l| tokenize(l).join(" ")).collect();
    let bleu = corpus_bleu(&hyp, &reference)?;
    println!("BLEU = {bleu:.2}");
    Ok(())
}

fn cmd_gen_qa(args: GenQaArgs) -> Result<()> {
    let sources = read_lines_file(&args.corpus)?;
    let template = match &args.template {
        Some(p) => PromptTemplate::load(p)?,
        None => default_template(),
    };
    let backend: Box<dyn GenerationBackend> = match args.backend.as_str() {
        "mock" => Box::new(MockBackend::new(args.seed)),
        "script" => {
            let cmd = args.script_cmd.as_ref().ok_or_else(|| {
                Error::Argument("--script-cmd is required with the script backend".into())
            })?;
            Box::new(ScriptBackend::new(cmd.clone()))
        }
        _ => Box::new(HttpBackend::from_env()?),
    };
    let outcomes =
        run_generation(backend.as_ref(), &template, &sources, args.seed, args.parallel)?;
    let pairs: Vec<QaPair> =
        outcomes.iter().enumerate().map(|(i, o)| o.pair().clone().at(i)).collect();
    save_vqa_pairs(&args.out, &pairs)?;
    let reject_path = args
        .reject_log
        .unwrap_or_else(|| args.out.with_extension("rejections.tsv"));
    write_rejection_log(&reject_path, &outcomes)?;
    let rejected = outcomes.iter().filter(|o| !o.is_accepted()).count();
    println!(
        "generated {} pairs ({} rejected and replaced by fallback; log: {})",
        pairs.len(),
        rejected,
        reject_path.display()
    );
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let pairs = load_vqa_pairs(&args.vqa)?;
    let stats = mmtvqa::data::answer_type_stats(&pairs);
    use mmtvqa::data::QaType;
    for t in [QaType::Noun, QaType::Character, QaType::Color, QaType::Number] {
        println!("{}\t{}", t, stats[&t]);
    }
    if stats[&QaType::None] > 0 {
        println!("{}\t{}", QaType::None, stats[&QaType::None]);
    }
    Ok(())
}

fn cmd_probe(args: ProbeArgs) -> Result<()> {
    let (model, vocabs) = load_run(&args.run, args.ckpt.as_ref())?;
    let spec = ProbingSpec::load(&args.spec)?;
    let sources = read_lines_file(&args.src)?;
    let image_ids = read_lines_file(&args.ids)?;
    let ref_lines = read_lines_file(&args.refs)?;
    if sources.len() != image_ids.len() || sources.len() != ref_lines.len() {
        return Err(Error::Alignment {
            context: "probe inputs".into(),
            left: sources.len(),
            right: image_ids.len().min(ref_lines.len()),
        });
    }
    let features = load_image_features(&args.features)?;

    let mut hypotheses = Vec::new();
    let mut masked_examples = Vec::new();
    for ((source, image_id), refs) in sources.iter().zip(&image_ids).zip(&ref_lines) {
        let tokens = tokenize(source);
        let (masked_tokens, masked_words) = mask_source(&tokens, &spec);
        if masked_words.is_empty() {
            continue;
        }
        let reference_words: Vec<String> = refs.split_whitespace().map(String::from).collect();
        let source_ids = vocabs.text.encode(&masked_tokens);
        let feats = mmtvqa::synth::features_of(&features, image_id)?;
        let out = greedy_translate(&model, &source_ids, &feats, args.max_len)?;
        hypotheses.push(vocabs.target.decode(&out));
        masked_examples.push(MaskedExample { masked_words, reference_words });
    }
    let restricted =
        probing_accuracy(&hypotheses, &masked_examples, &spec, ProbingMode::Restricted)?;
    let relaxed = probing_accuracy(&hypotheses, &masked_examples, &spec, ProbingMode::Relaxed)?;
    println!("masked sentences\t{}", masked_examples.len());
    println!("restricted\t{restricted:.4}");
    println!("relaxed\t{relaxed:.4}");
    Ok(())
}

fn cmd_ablate_confusion(args: AblateConfusionArgs) -> Result<()> {
    if args.rates.is_empty() {
        return Err(Error::Argument("--rates must name at least one rate".into()));
    }
    let (model, vocabs) = load_run(&args.run, args.ckpt.as_ref())?;
    let (split, features) = load_eval_data(&args.src, Some(&args.tgt), &args.ids, &args.features)?;
    let examples = align_eval_examples(&split, &features, &vocabs, &WordTokenizer)?;
    let references: Vec<String> = split.targets.iter().map(|t| tokenize(t).join(" ")).collect();

    let mut reports: Vec<EvalReport> = Vec::new();
    for &rate in &args.rates {
        let confused = confuse_images(&examples, &features, rate, args.seed)?;
        let hyps =
            translate_examples(&model, &confused, &features, &vocabs, args.max_len, 1)?;
        reports.push(EvalReport {
            split: split.name.clone(),
            bleu: corpus_bleu(&hyps, &references)?,
            n_sentences: hyps.len(),
            metadata: vec![
                ("confusion_rate".into(), rate.to_string()),
                ("seed".into(), args.seed.to_string()),
            ],
        });
    }
    let mut csv = String::from("rate,bleu\n");
    for (rate, report) in args.rates.iter().zip(&reports) {
        csv.push_str(&format!("{rate},{:.2}\n", report.bleu));
    }
    match &args.out {
        Some(p) => std::fs::write(p, &csv).map_err(|e| Error::io(p.display().to_string(), e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_ablate_incongruent(args: AblateIncongruentArgs) -> Result<()> {
    let config = load_config(args.config.as_ref(), args.seed)?;
    let train_split = load_corpus(&SplitPaths::in_dir(&args.data_dir, "train"))?;
    let val_split = load_corpus(&SplitPaths::in_dir(&args.data_dir, "val"))?;
    let train_pairs = load_vqa_pairs(&args.data_dir.join("train.vqa.tsv"))?;
    let val_pairs = load_vqa_pairs(&args.data_dir.join("val.vqa.tsv"))?;
    let features = load_image_features(&args.data_dir.join("features.imf"))?;
    let vocabs = build_vocabs(&train_split, &train_pairs, config.min_count)?;
    let tokenizer = WordTokenizer;
    let train_examples = align_examples(&train_split, &train_pairs, &features, &vocabs, &tokenizer)?;
    let val_examples = align_examples(&val_split, &val_pairs, &features, &vocabs, &tokenizer)?;
    let references: Vec<String> = val_split.targets.iter().map(|t| tokenize(t).join(" ")).collect();

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(args.out.display().to_string(), e))?;
    config.save(&args.out.join("effective.cfg"))?;
    let mut csv = String::from("mode,bleu\n");
    for mode in &args.modes {
        let train_set = match mode.as_str() {
            "none" => train_examples.clone(),
            "answer" => shuffle_incongruent(&train_examples, ShuffleMode::Answer, config.seed)?,
            "question" => shuffle_incongruent(&train_examples, ShuffleMode::Question, config.seed)?,
            other => {
                return Err(Error::Argument(format!(
                    "unknown mode {other:?}; expected none, answer or question"
                )))
            }
        };
        let model_config = config.model_config(
            features.feature_dim,
            features.n_patches,
            vocabs.text.len(),
            vocabs.target.len(),
            vocabs.answer.len(),
        );
        let model = Model::new(model_config)?;
        let run_dir = args.out.join(format!("run_{mode}"));
        let data = TrainData { train: &train_set, val: &val_examples, features: &features };
        let outcome = train(model, &data, &config.train_settings(), &run_dir)?;
        outcome.log.save_csv(&run_dir.join("train_log.csv"))?;
        let hyps = translate_examples(
            &outcome.model,
            &val_examples,
            &features,
            &vocabs,
            args.max_len,
            1,
        )?;
        let bleu = corpus_bleu(&hyps, &references)?;
        csv.push_str(&format!("{mode},{bleu:.2}\n"));
    }
    let csv_path = args.out.join("incongruent.csv");
    std::fs::write(&csv_path, &csv).map_err(|e| Error::io(csv_path.display().to_string(), e))?;
    print!("{csv}");
    Ok(())
}

fn cmd_subset(args: SubsetArgs) -> Result<()> {
    let sources = read_lines_file(&args.src)?;
    let targets = read_lines_file(&args.tgt)?;
    let image_ids = read_lines_file(&args.ids)?;
    let split = CorpusSplit::new(args.name.clone(), sources, targets, image_ids)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::io(args.out_dir.display().to_string(), e))?;

    let write_split = |s: &CorpusSplit| -> Result<()> {
        write_text(&args.out_dir.join(format!("{}.src", s.name)), &s.sources)?;
        write_text(&args.out_dir.join(format!("{}.tgt", s.name)), &s.targets)?;
        write_text(&args.out_dir.join(format!("{}.ids", s.name)), &s.image_ids)?;
        println!("{}\t{} sentences", s.name, s.len());
        Ok(())
    };

    match args.kind.as_str() {
        "con" => {
            let words: BTreeSet<String> = match (&args.words, &args.backend) {
                (Some(path), _) => {
                    read_lines_file(path)?.into_iter().filter(|w| !w.is_empty()).collect()
                }
                (None, Some(backend)) => {
                    let backend: Box<dyn GenerationBackend> = match backend.as_str() {
                        "mock" => Box::new(MockBackend::new(args.seed)),
                        "script" => {
                            let cmd = args.script_cmd.as_ref().ok_or_else(|| {
                                Error::Argument(
                                    "--script-cmd is required with the script backend".into(),
                                )
                            })?;
                            Box::new(ScriptBackend::new(cmd.clone()))
                        }
                        _ => Box::new(HttpBackend::from_env()?),
                    };
                    mmtvqa::eval::identify_confusing_words(backend.as_ref(), &split.sources)?
                }
                (None, None) => {
                    return Err(Error::Argument(
                        "kind=con needs --words or --backend".into(),
                    ))
                }
            };
            write_split(&build_con_subset(&split, &words)?)?;
        }
        "hard-words" => {
            let (hard, easy) = split_by_hard_words(&split, args.threshold)?;
            write_split(&hard)?;
            write_split(&easy)?;
        }
        "length" => {
            let assign = split_by_sentence_length(&split)?;
            let short: Vec<usize> = (0..split.len())
                .filter(|&i| assign[i] == LengthCluster::Short)
                .collect();
            let long: Vec<usize> =
                (0..split.len()).filter(|&i| assign[i] == LengthCluster::Long).collect();
            let mut short_split = split.select(&short);
            short_split.name = format!("{}-short", split.name);
            let mut long_split = split.select(&long);
            long_split.name = format!("{}-long", split.name);
            write_split(&short_split)?;
            write_split(&long_split)?;
        }
        _ => {
            let tags_path = args
                .tags
                .as_ref()
                .ok_or_else(|| Error::Argument("--tags is required for kind=pos".into()))?;
            let tag = args
                .tag
                .as_ref()
                .ok_or_else(|| Error::Argument("--tag is required for kind=pos".into()))?;
            let tags = read_lines_file(tags_path)?;
            write_split(&pos_subset(&split, &tags, tag)?)?;
        }
    }
    Ok(())
}

fn cmd_avg_ckpt(args: AvgCkptArgs) -> Result<()> {
    let paths: Vec<PathBuf> = if !args.ckpts.is_empty() {
        args.ckpts.clone()
    } else if let Some(run) = &args.run {
        list_checkpoints(&run.join("ckpt"))?
            .into_iter()
            .rev()
            .take(args.last)
            .map(|(_, p)| p)
            .collect()
    } else {
        return Err(Error::Argument("pass --ckpts or --run".into()));
    };
    if paths.is_empty() {
        return Err(Error::Argument("no checkpoints found to average".into()));
    }
    let (config, params) = average_checkpoints(&paths)?;
    save_checkpoint(&args.out, &config, &params)?;
    println!("averaged {} checkpoints into {}", paths.len(), args.out.display());
    Ok(())
}

fn cmd_plot_loss(args: PlotLossArgs) -> Result<()> {
    plot_loss_file(&args.log, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
