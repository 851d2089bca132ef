//! Preset train/evaluate pipelines over real corpora.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{csv_field, evaluate, EvalReport};
use crate::corpus::{build_vocabulary, load_corpus, vectorize_all, CorpusFormat, DocVector, RawDocument};
use crate::error::{Error, Result};
use crate::estimators::{fit_split, EstimatorConfig, EstimatorKind, PriorMode, DEFAULT_ALPHA, DEFAULT_T};
use crate::labeling::{split_dataset, ClassSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 20% of each class for training, half of it positive and half negative.
    Fig1Mixed,
    /// 90% for training, all of it negatively labeled.
    Fig2NegativeOnly,
    /// 10% for training, all positive; evaluated on the held-out part.
    Fig3S1Only,
    /// Same split and models as `fig3_s1_only`, evaluated on the training part.
    Fig4TrainsetEval,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Fig1Mixed,
        Preset::Fig2NegativeOnly,
        Preset::Fig3S1Only,
        Preset::Fig4TrainsetEval,
    ];

    /// `(train fraction, S1 fraction of the training part)`.
    pub fn fractions(self) -> (f64, f64) {
        match self {
            Preset::Fig1Mixed => (0.2, 0.5),
            Preset::Fig2NegativeOnly => (0.9, 0.0),
            Preset::Fig3S1Only | Preset::Fig4TrainsetEval => (0.1, 1.0),
        }
    }

    pub fn evaluates_on_training(self) -> bool {
        self == Preset::Fig4TrainsetEval
    }

    pub fn default_estimators(self) -> Vec<EstimatorKind> {
        use EstimatorKind::*;
        match self {
            Preset::Fig1Mixed => vec![Nb, L1, L2],
            Preset::Fig2NegativeOnly => vec![L1, L2],
            Preset::Fig3S1Only | Preset::Fig4TrainsetEval => vec![Nb, SelfCorrect],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1Mixed => "fig1_mixed",
            Preset::Fig2NegativeOnly => "fig2_negative_only",
            Preset::Fig3S1Only => "fig3_s1_only",
            Preset::Fig4TrainsetEval => "fig4_trainset_eval",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            Error::InvalidArgument(format!("unknown preset {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSelection {
    #[default]
    Top10BySize,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: CorpusFormat,
}

fn default_format() -> CorpusFormat {
    CorpusFormat::Jsonl
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_t() -> f64 {
    DEFAULT_T
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_min_count() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetRef,
    #[serde(deserialize_with = "deserialize_preset")]
    pub preset: Preset,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Preset default when absent.
    #[serde(default)]
    pub estimators: Option<Vec<EstimatorKind>>,
    #[serde(default)]
    pub class_selection: ClassSelection,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
}

fn deserialize_preset<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Preset, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

impl ExperimentSpec {
    pub fn new(path: impl Into<PathBuf>, format: CorpusFormat, preset: Preset) -> Self {
        ExperimentSpec {
            dataset: DatasetRef {
                path: path.into(),
                format,
            },
            preset,
            seeds: default_seeds(),
            t: DEFAULT_T,
            alpha: DEFAULT_ALPHA,
            estimators: None,
            class_selection: ClassSelection::default(),
            min_count: default_min_count(),
        }
    }

    /// Reads a JSON config, or TOML when the extension is `.toml`. A relative
    /// dataset path is taken relative to the config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: ExperimentSpec = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::parse(path, 0, e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?
        };
        if spec.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                spec.dataset.path = dir.join(&spec.dataset.path);
            }
        }
        Ok(spec)
    }

    pub fn estimators(&self) -> Vec<EstimatorKind> {
        self.estimators.clone().unwrap_or_else(|| self.preset.default_estimators())
    }

    pub fn validate(&self) -> Result<()> {
        let estimators = self.estimators();
        if estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators requested".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("no seeds given".into()));
        }
        if self.preset == Preset::Fig2NegativeOnly {
            if let Some(e) = estimators.iter().find(|e| e.needs_positive_data()) {
                return Err(Error::InvalidArgument(format!(
                    "estimator {e} needs positively labeled (S1) data, which preset {} does not provide",
                    self.preset
                )));
            }
        }
        if self.min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        let config = self.config(false);
        if estimators.iter().any(|e| e.uses_t()) {
            config.check_t()?;
        }
        config.check_alpha()
    }

    fn config(&self, has_s1: bool) -> EstimatorConfig {
        EstimatorConfig {
            t: self.t,
            smoothing_alpha: self.alpha,
            prior_mode: if has_s1 { PriorMode::FromS1 } else { PriorMode::Uniform },
        }
    }
}

/// Keeps the `n` largest classes (ties to the lexicographically smaller
/// name) and the documents labeled with them. Class indices follow name order.
pub fn select_top_classes(docs: &[RawDocument], n: usize) -> Result<(ClassSet, Vec<RawDocument>)> {
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        if let Some(c) = &doc.source_class {
            *sizes.entry(c.as_str()).or_default() += 1;
        }
    }
    if sizes.len() < n {
        return Err(Error::InvalidArgument(format!(
            "corpus has {} classes; {n} requested",
            sizes.len()
        )));
    }
    let mut ranked: Vec<(&str, usize)> = sizes.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut keep: Vec<&str> = ranked.into_iter().take(n).map(|(c, _)| c).collect();
    keep.sort_unstable();
    let classes = ClassSet::new(keep.iter().copied())?;
    let filtered = docs
        .iter()
        .filter(|d| d.source_class.as_deref().is_some_and(|c| classes.index_of(c).is_some()))
        .cloned()
        .collect();
    Ok((classes, filtered))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub estimator: EstimatorKind,
    pub seed: u64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub estimator: EstimatorKind,
    pub seeds: usize,
    pub mean_macro_accuracy: f64,
    /// Sample standard deviation over seeds; 0 for a single seed.
    pub std_macro_accuracy: f64,
    pub mean_micro_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub documents: usize,
    pub vocabulary_size: usize,
    pub vocabulary_fingerprint: String,
    pub dropped_empty: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentSpec,
    pub classes: ClassSet,
    pub corpus: CorpusSummary,
    /// Ordered by requested estimator, then by seed.
    pub runs: Vec<RunResult>,
    pub aggregate: Vec<Aggregate>,
}

impl ExperimentReport {
    pub fn aggregate_for(&self, estimator: EstimatorKind) -> Option<&Aggregate> {
        self.aggregate.iter().find(|a| a.estimator == estimator)
    }
}

fn aggregate(estimators: &[EstimatorKind], runs: &[RunResult]) -> Vec<Aggregate> {
    estimators
        .iter()
        .map(|&estimator| {
            let macros: Vec<f64> = runs
                .iter()
                .filter(|r| r.estimator == estimator)
                .map(|r| r.report.macro_accuracy)
                .collect();
            let micro: f64 = runs
                .iter()
                .filter(|r| r.estimator == estimator)
                .map(|r| r.report.micro_accuracy)
                .sum();
            let n = macros.len() as f64;
            let mean = macros.iter().sum::<f64>() / n;
            let std = if macros.len() > 1 {
                (macros.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Aggregate {
                estimator,
                seeds: macros.len(),
                mean_macro_accuracy: mean,
                std_macro_accuracy: std,
                mean_micro_accuracy: micro / n,
            }
        })
        .collect()
}

/// Loads, filters and vectorizes the corpus of `spec`.
pub fn prepare_corpus(spec: &ExperimentSpec) -> Result<(ClassSet, Vec<(DocVector, usize)>, CorpusSummary)> {
    let raw = load_corpus(&spec.dataset.path, spec.dataset.format)?;
    let (classes, docs) = match spec.class_selection {
        ClassSelection::Top10BySize => select_top_classes(&raw, 10)?,
        ClassSelection::All => {
            let n = raw
                .iter()
                .filter_map(|d| d.source_class.as_deref())
                .collect::<std::collections::BTreeSet<_>>()
                .len();
            select_top_classes(&raw, n)?
        }
    };
    let vocab = build_vocabulary(&docs, spec.min_count)?;
    let (kept, dropped) = vectorize_all(&docs, &vocab);
    if !dropped.is_empty() {
        log::warn!("dropped {} documents with no in-vocabulary tokens", dropped.len());
    }
    let labeled: Vec<(DocVector, usize)> = kept
        .into_iter()
        .map(|(pos, vec)| {
            let class = docs[pos].source_class.as_deref().and_then(|c| classes.index_of(c));
            (vec, class.expect("filtered to selected classes"))
        })
        .collect();
    let summary = CorpusSummary {
        documents: labeled.len(),
        vocabulary_size: vocab.len(),
        vocabulary_fingerprint: vocab.fingerprint(),
        dropped_empty: dropped.len(),
    };
    Ok((classes, labeled, summary))
}

/// Runs every (estimator, seed) pair of `spec` on an already vectorized corpus.
pub fn run_on_documents(
    spec: &ExperimentSpec,
    classes: &ClassSet,
    docs: &[(DocVector, usize)],
    v: usize,
) -> Result<Vec<RunResult>> {
    spec.validate()?;
    let estimators = spec.estimators();
    let (train_frac, s1_frac) = spec.preset.fractions();
    let per_seed: Vec<Result<Vec<RunResult>>> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let split = split_dataset(docs, classes, train_frac, s1_frac, seed)?;
            let config = spec.config(!split.s1.is_empty());
            let eval_set = if spec.preset.evaluates_on_training() {
                &split.s1
            } else {
                &split.test
            };
            estimators
                .iter()
                .map(|&estimator| {
                    let params = fit_split(estimator, &split.s1, &split.s2, classes, v, &config)?;
                    Ok(RunResult {
                        estimator,
                        seed,
                        report: evaluate(eval_set, &params)?,
                    })
                })
                .collect()
        })
        .collect();
    let mut by_seed = Vec::with_capacity(per_seed.len());
    for runs in per_seed {
        by_seed.push(runs?);
    }
    let mut runs = Vec::with_capacity(estimators.len() * spec.seeds.len());
    for e in 0..estimators.len() {
        for seed_runs in &by_seed {
            runs.push(seed_runs[e].clone());
        }
    }
    Ok(runs)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (classes, docs, corpus) = prepare_corpus(spec)?;
    let runs = run_on_documents(spec, &classes, &docs, corpus.vocabulary_size)?;
    Ok(ExperimentReport {
        aggregate: aggregate(&spec.estimators(), &runs),
        config: spec.clone(),
        classes,
        corpus,
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

/// `estimator,seed,class,accuracy` rows per run and class, then per-run
/// `macro`/`micro` rows and per-estimator `mean`/`std` rows.
pub fn report_to_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("estimator,seed,class,accuracy\n");
    for run in &report.runs {
        for (i, acc) in run.report.per_class_accuracy.iter().enumerate() {
            let acc = acc.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", run.estimator, run.seed, csv_field(report.classes.name(i)), acc);
        }
    }
    for run in &report.runs {
        let _ = writeln!(out, "{},{},macro,{}", run.estimator, run.seed, run.report.macro_accuracy);
        let _ = writeln!(out, "{},{},micro,{}", run.estimator, run.seed, run.report.micro_accuracy);
    }
    for agg in &report.aggregate {
        let _ = writeln!(out, "{},mean,macro,{}", agg.estimator, agg.mean_macro_accuracy);
        let _ = writeln!(out, "{},std,macro,{}", agg.estimator, agg.std_macro_accuracy);
        let _ = writeln!(out, "{},mean,micro,{}", agg.estimator, agg.mean_micro_accuracy);
    }
    out
}

pub fn export_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => report_to_csv(report),
        ReportFormat::Json => serde_json::to_string_pretty(report)? + "\n",
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}
