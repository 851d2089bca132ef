use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use negbayes::classifier::{evaluate, predict_all, write_predictions};
use negbayes::corpus::{build_vocabulary, load_corpus, vectorize_all, CorpusFormat, DocVector, Vocabulary};
use negbayes::estimators::{fit_split, EstimatorConfig, EstimatorKind, Model, PriorMode};
use negbayes::experiments::{export_report, run_experiment, ExperimentSpec, ReportFormat};
use negbayes::labeling::{read_dataset, split_dataset, write_dataset, ClassSet, LabeledRecord, Origin};
use negbayes::theory::{run_theory_checks, stats_to_csv, TheoryConfig};
use negbayes::Error;

#[derive(Parser)]
#[command(name = "negbayes", version, about = "Naive Bayes text classification with positive and negative labels")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a corpus and write a vectorized dataset bundle.
    Ingest(IngestArgs),
    /// Fit an estimator on a dataset bundle and write a model file.
    Train(TrainArgs),
    /// Score documents with a trained model.
    Predict(PredictArgs),
    /// Report per-class accuracy of a model on a labeled test bundle.
    Evaluate(EvaluateArgs),
    /// Run a preset experiment from a JSON or TOML config.
    Experiment(ExperimentArgs),
    /// Check the closed-form bias and variance against Monte Carlo.
    VerifyTheory(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    #[value(alias = "labeled_dirs")]
    LabeledDirs,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => CorpusFormat::Jsonl,
            FormatArg::LabeledDirs => CorpusFormat::LabeledDirs,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Corpus file or directory.
    input: PathBuf,
    /// Output bundle (`.jsonl`).
    output: PathBuf,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: FormatArg,
    /// Minimum corpus frequency of a vocabulary term.
    #[arg(long, default_value_t = 2)]
    min_count: usize,
    /// Reuse the vocabulary (and classes) of a model or bundle instead of
    /// building one.
    #[arg(long)]
    vocab_from: Option<PathBuf>,
    /// Also write `<output>.train.jsonl` and `<output>.test.jsonl` with this
    /// fraction of every class in the training part.
    #[arg(long)]
    train_frac: Option<f64>,
    /// Fraction of the training part kept positive; the rest gets one
    /// synthesized negative label each.
    #[arg(long, default_value_t = 1.0)]
    s1_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Nb,
    L1,
    L2,
    #[value(alias = "selfcorrect", alias = "self_correct")]
    SelfCorrect,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Nb => EstimatorKind::Nb,
            EstimatorArg::L1 => EstimatorKind::L1,
            EstimatorArg::L2 => EstimatorKind::L2,
            EstimatorArg::SelfCorrect => EstimatorKind::SelfCorrect,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    #[value(alias = "from_s1")]
    FromS1,
    Uniform,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset bundle written by `ingest`.
    dataset: PathBuf,
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    /// Likelihood-ratio offset for l2 and self-correct; must exceed 1.
    #[arg(long, default_value_t = 2.0)]
    t: f64,
    /// Laplace smoothing added to every term count.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Class priors. from-s1 falls back to uniform when the dataset has no
    /// positive records.
    #[arg(long, value_enum, default_value = "from-s1")]
    prior_mode: PriorArg,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputArg {
    Bundle,
    Jsonl,
    #[value(alias = "labeled_dirs")]
    LabeledDirs,
}

#[derive(Args)]
struct PredictArgs {
    model: PathBuf,
    /// Documents to score.
    input: PathBuf,
    /// `bundle` for `ingest` output, otherwise a raw corpus vectorized with
    /// the model vocabulary.
    #[arg(long, value_enum, default_value = "bundle")]
    input_format: InputArg,
    /// Predictions file (JSON lines); standard output when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    model: PathBuf,
    /// Test bundle with positively labeled records.
    test: PathBuf,
    /// JSON report path; a CSV with the same stem is written next to it.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    /// Output prefix: writes `<prefix>.json` and `<prefix>.csv`. Defaults to
    /// the config file stem in the current directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    config: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-entry statistics CSV.
    #[arg(short, long, default_value = "theory.csv")]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn require_exists(path: &Path) -> CliResult {
    if !path.exists() {
        return usage(format!("{}: no such file or directory", path.display()));
    }
    Ok(())
}

fn io_error(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| {
        CliError::Domain(Error::Io {
            path: path.to_owned(),
            source: e,
        })
    }
}

fn ensure_parent(path: &Path) -> CliResult {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_error(dir)),
        _ => Ok(()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Vocabulary and classes of a model file or a dataset bundle.
fn load_context(path: &Path) -> CliResult<(Vocabulary, Option<ClassSet>)> {
    if let Ok(model) = Model::load(path) {
        return Ok((model.vocab, Some(model.classes)));
    }
    let file = read_dataset(path, None)?;
    match file.vocab {
        Some(v) => Ok((v, Some(file.classes))),
        None => usage(format!("{} carries no vocabulary", path.display())),
    }
}

fn cmd_ingest(a: IngestArgs) -> CliResult {
    require_exists(&a.input)?;
    if a.min_count == 0 {
        return usage("--min-count must be >= 1");
    }
    if let Some(f) = a.train_frac {
        if !(f > 0.0 && f < 1.0) {
            return usage("--train-frac must be in (0, 1)");
        }
    }
    if !(0.0..=1.0).contains(&a.s1_frac) {
        return usage("--s1-frac must be in [0, 1]");
    }
    if let Some(p) = &a.vocab_from {
        require_exists(p)?;
    }
    let docs = load_corpus(&a.input, a.format.into())?;
    let (vocab, given_classes) = match &a.vocab_from {
        Some(p) => load_context(p)?,
        None => (build_vocabulary(&docs, a.min_count)?, None),
    };
    let classes = match given_classes {
        Some(c) => c,
        None => {
            let names: std::collections::BTreeSet<&str> = docs.iter().filter_map(|d| d.source_class.as_deref()).collect();
            if names.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "corpus has {} labeled classes; at least 2 are needed (or pass --vocab-from)",
                    names.len()
                ))
                .into());
            }
            ClassSet::new(names)?
        }
    };
    let (kept, dropped) = vectorize_all(&docs, &vocab);
    if !dropped.is_empty() {
        warn!("dropped {} documents with no in-vocabulary tokens", dropped.len());
    }
    let mut labeled: Vec<(DocVector, usize)> = Vec::new();
    let mut unlabeled = Vec::new();
    for (pos, vec) in kept {
        match docs[pos].source_class.as_deref().map(|c| (c, classes.index_of(c))) {
            Some((_, Some(c))) => labeled.push((vec, c)),
            Some((c, None)) => {
                warn!("document {:?} has unknown class {c:?}; kept unlabeled", vec.doc_id());
                unlabeled.push(vec);
            }
            None => unlabeled.push(vec),
        }
    }
    let records: Vec<LabeledRecord> = labeled
        .iter()
        .map(|(d, c)| LabeledRecord::positive(d.clone(), *c, classes.k()))
        .collect::<Result<_, _>>()?;
    ensure_parent(&a.output)?;
    write_dataset(&a.output, &classes, Some(&vocab), &records, &unlabeled)?;
    println!(
        "docs {} (labeled {}, unlabeled {}, dropped {}), v {}, classes {}, vocabulary {}",
        records.len() + unlabeled.len(),
        records.len(),
        unlabeled.len(),
        dropped.len(),
        vocab.len(),
        classes.k(),
        vocab.fingerprint()
    );

    if let Some(train_frac) = a.train_frac {
        let split = split_dataset(&labeled, &classes, train_frac, a.s1_frac, a.seed)?;
        let train_path = with_suffix(&a.output, ".train.jsonl");
        let test_path = with_suffix(&a.output, ".test.jsonl");
        let mut train = split.s1.clone();
        train.extend(split.s2.iter().cloned());
        write_dataset(&train_path, &classes, Some(&vocab), &train, &[])?;
        write_dataset(&test_path, &classes, Some(&vocab), &split.test, &[])?;
        let meta = serde_json::json!({
            "seed": a.seed,
            "train_frac": train_frac,
            "s1_frac": a.s1_frac,
            "s1": split.s1.len(),
            "s2": split.s2.len(),
            "test": split.test.len(),
        });
        let meta_path = with_suffix(&a.output, ".split.json");
        fs::write(&meta_path, meta.to_string() + "\n").map_err(io_error(&meta_path))?;
        println!(
            "split seed {}: S1 {}, S2 {}, test {} -> {}, {}",
            a.seed,
            split.s1.len(),
            split.s2.len(),
            split.test.len(),
            train_path.display(),
            test_path.display()
        );
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CliResult {
    require_exists(&a.dataset)?;
    let estimator: EstimatorKind = a.estimator.into();
    if estimator.uses_t() && !(a.t > 1.0 && a.t.is_finite()) {
        return usage(format!("--t must be > 1 for {estimator} (got {})", a.t));
    }
    if !(a.alpha >= 0.0 && a.alpha.is_finite()) {
        return usage(format!("--alpha must be >= 0 (got {})", a.alpha));
    }
    let file = read_dataset(&a.dataset, None)?;
    let Some(vocab) = file.vocab.clone() else {
        return usage(format!("{} has no vocabulary header; write it with `ingest`", a.dataset.display()));
    };
    let (s1, s2): (Vec<LabeledRecord>, Vec<LabeledRecord>) =
        file.records.iter().cloned().partition(|r| r.origin() == Origin::S1);
    let mut prior_mode = match a.prior_mode {
        PriorArg::FromS1 => PriorMode::FromS1,
        PriorArg::Uniform => PriorMode::Uniform,
    };
    if s1.is_empty() && prior_mode == PriorMode::FromS1 && !estimator.needs_positive_data() {
        info!("no positive records; using uniform priors");
        prior_mode = PriorMode::Uniform;
    }
    let config = EstimatorConfig {
        t: a.t,
        smoothing_alpha: a.alpha,
        prior_mode,
    };
    let params = fit_split(estimator, &s1, &s2, &file.classes, vocab.len(), &config)?;
    let model = Model {
        classes: file.classes,
        vocab,
        params,
    };
    ensure_parent(&a.out)?;
    model.save(&a.out)?;
    println!(
        "trained {estimator} on S1 {} / S2 {} records -> {}",
        s1.len(),
        s2.len(),
        a.out.display()
    );
    Ok(())
}

fn check_vocab(model: &Model, data: Option<&Vocabulary>) -> CliResult {
    if let Some(v) = data {
        if v != &model.vocab {
            return Err(Error::VocabularyMismatch {
                model_hash: model.vocab.fingerprint(),
                data_hash: v.fingerprint(),
            }
            .into());
        }
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> CliResult {
    require_exists(&a.model)?;
    require_exists(&a.input)?;
    let model = Model::load(&a.model)?;
    let docs: Vec<(DocVector, Option<usize>)> = match a.input_format {
        InputArg::Bundle => {
            let file = read_dataset(&a.input, Some(&model.vocab))?;
            check_vocab(&model, file.vocab.as_ref())?;
            file.records
                .iter()
                .map(|r| (r.doc().clone(), r.positive_class()))
                .chain(file.unlabeled.into_iter().map(|d| (d, None)))
                .collect()
        }
        InputArg::Jsonl | InputArg::LabeledDirs => {
            let format = match a.input_format {
                InputArg::Jsonl => CorpusFormat::Jsonl,
                _ => CorpusFormat::LabeledDirs,
            };
            let raw = load_corpus(&a.input, format)?;
            let (kept, dropped) = vectorize_all(&raw, &model.vocab);
            if !dropped.is_empty() {
                warn!("skipped {} documents with no in-vocabulary tokens", dropped.len());
            }
            kept.into_iter()
                .map(|(pos, d)| {
                    let truth = raw[pos].source_class.as_deref().and_then(|c| model.classes.index_of(c));
                    (d, truth)
                })
                .collect()
        }
    };
    let refs: Vec<(&DocVector, Option<usize>)> = docs.iter().map(|(d, c)| (d, *c)).collect();
    let preds = predict_all(&refs, &model.params);
    match &a.out {
        Some(path) => {
            ensure_parent(path)?;
            let file = fs::File::create(path).map_err(io_error(path))?;
            let mut w = io::BufWriter::new(file);
            write_predictions(&mut w, &preds, &model.classes)?;
            w.flush().map_err(io_error(path))?;
            eprintln!("{} predictions -> {}", preds.len(), path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut w = io::BufWriter::new(stdout.lock());
            write_predictions(&mut w, &preds, &model.classes)?;
            w.flush().map_err(io_error(Path::new("<stdout>")))?;
        }
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult {
    require_exists(&a.model)?;
    require_exists(&a.test)?;
    let model = Model::load(&a.model)?;
    let file = read_dataset(&a.test, Some(&model.vocab))?;
    check_vocab(&model, file.vocab.as_ref())?;
    let test: Vec<LabeledRecord> = file.records.into_iter().filter(|r| r.origin() == Origin::S1).collect();
    let report = evaluate(&test, &model.params)?;
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n";
    ensure_parent(&a.out)?;
    fs::write(&a.out, json).map_err(io_error(&a.out))?;
    let csv_path = a.out.with_extension("csv");
    fs::write(&csv_path, report.to_csv(&model.classes)).map_err(io_error(&csv_path))?;
    println!(
        "macro accuracy {:.4}, micro accuracy {:.4} on {} documents",
        report.macro_accuracy, report.micro_accuracy, report.n_test
    );
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> CliResult {
    require_exists(&a.config)?;
    let spec = ExperimentSpec::from_path(&a.config).map_err(|e| CliError::Usage(e.to_string()))?;
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_experiment(&spec)?;
    let prefix = a
        .out
        .unwrap_or_else(|| PathBuf::from(a.config.file_stem().unwrap_or_default()));
    let json_path = prefix.with_extension("json");
    let csv_path = prefix.with_extension("csv");
    ensure_parent(&json_path)?;
    export_report(&report, &json_path, ReportFormat::Json)?;
    export_report(&report, &csv_path, ReportFormat::Csv)?;
    println!(
        "{} on {} documents, {} classes, seeds {:?}",
        spec.preset,
        report.corpus.documents,
        report.classes.k(),
        spec.seeds
    );
    for agg in &report.aggregate {
        println!(
            "{:<12} macro {:.4} +/- {:.4}  micro {:.4}",
            agg.estimator.to_string(),
            agg.mean_macro_accuracy,
            agg.std_macro_accuracy,
            agg.mean_micro_accuracy
        );
    }
    println!("report -> {}, {}", json_path.display(), csv_path.display());
    Ok(())
}

fn cmd_verify_theory(a: VerifyArgs) -> CliResult {
    require_exists(&a.config)?;
    if a.trials < 2 {
        return usage(format!("--trials must be >= 2 (got {})", a.trials));
    }
    let text = fs::read_to_string(&a.config).map_err(io_error(&a.config))?;
    let config: TheoryConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", a.config.display())))?;
    config
        .synthetic
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_theory_checks(&config, a.trials, a.seed)?;
    ensure_parent(&a.out)?;
    fs::write(&a.out, stats_to_csv(&config.synthetic, &report.stats)).map_err(io_error(&a.out))?;
    if let Some(table) = &report.convergence {
        let path = with_suffix(&a.out, ".convergence.csv");
        fs::write(&path, table.to_csv()).map_err(io_error(&path))?;
    }
    let meta = serde_json::json!({ "seed": a.seed, "trials": a.trials, "config": config });
    let meta_path = with_suffix(&a.out, ".meta.json");
    fs::write(&meta_path, meta.to_string() + "\n").map_err(io_error(&meta_path))?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Error::InvalidArgument("one or more theory checks failed".into()).into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::VerifyTheory(a) => cmd_verify_theory(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
