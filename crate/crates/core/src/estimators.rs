//! Closed-form class-conditional term distributions.
//!
//! Every estimator is a weighted count: record `x` contributes `w_i(x) * x_j`
//! to class `i`'s numerator for term `j`, and each row is normalized to sum
//! to one. The estimators differ only in their weights:
//!
//! | estimator     | records used | weight `w_i(x)`                      |
//! |---------------|--------------|--------------------------------------|
//! | `Nb`          | S1           | `y_i`                                |
//! | `L1`          | S1, S2       | `y_i` on S1, `(1 - z_i) / (k - Σ_{l≠i} z_l)` on S2 |
//! | `L2`          | S1 ∪ S2      | `y_i + t - z_i`                      |
//! | `SelfCorrect` | S1           | `2 y_i + t - 1`                      |

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::labeling::{l1_weight, ClassSet, LabeledRecord, Origin, PartialDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "NB")]
    Nb,
    L1,
    L2,
    SelfCorrect,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Nb,
        EstimatorKind::L1,
        EstimatorKind::L2,
        EstimatorKind::SelfCorrect,
    ];

    /// Whether the estimator is parameterized by `t`.
    pub fn uses_t(self) -> bool {
        matches!(self, EstimatorKind::L2 | EstimatorKind::SelfCorrect)
    }

    /// Whether the estimator can only learn from positive records.
    pub fn needs_positive_data(self) -> bool {
        matches!(self, EstimatorKind::Nb | EstimatorKind::SelfCorrect)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Nb => "NB",
            EstimatorKind::L1 => "L1",
            EstimatorKind::L2 => "L2",
            EstimatorKind::SelfCorrect => "SelfCorrect",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "nb" => Ok(EstimatorKind::Nb),
            "l1" => Ok(EstimatorKind::L1),
            "l2" => Ok(EstimatorKind::L2),
            "selfcorrect" => Ok(EstimatorKind::SelfCorrect),
            _ => Err(Error::InvalidArgument(format!(
                "unknown estimator {s:?} (expected nb, l1, l2 or self-correct)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Add-one smoothed class frequencies of the positive records.
    FromS1,
    Uniform,
}

impl FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "from_s1" | "from-s1" => Ok(PriorMode::FromS1),
            "uniform" => Ok(PriorMode::Uniform),
            _ => Err(Error::InvalidArgument(format!(
                "unknown prior mode {s:?} (expected from_s1 or uniform)"
            ))),
        }
    }
}

pub const DEFAULT_T: f64 = 2.0;
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub t: f64,
    pub smoothing_alpha: f64,
    pub prior_mode: PriorMode,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            t: DEFAULT_T,
            smoothing_alpha: DEFAULT_ALPHA,
            prior_mode: PriorMode::FromS1,
        }
    }
}

impl EstimatorConfig {
    /// Exact (unsmoothed) estimator with the given `t`.
    pub fn exact(t: f64) -> Self {
        EstimatorConfig {
            t,
            smoothing_alpha: 0.0,
            prior_mode: PriorMode::Uniform,
        }
    }

    pub fn check_alpha(&self) -> Result<()> {
        if !(self.smoothing_alpha >= 0.0 && self.smoothing_alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothing_alpha must be finite and >= 0, got {}",
                self.smoothing_alpha
            )));
        }
        Ok(())
    }

    pub fn check_t(&self) -> Result<()> {
        if !(self.t > 1.0 && self.t.is_finite()) {
            return Err(Error::InvalidT(self.t));
        }
        Ok(())
    }
}

/// Fitted parameters: a `k x v` row-stochastic `theta` and class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    pub theta: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
    pub smoothing_alpha: f64,
    pub estimator: EstimatorKind,
    /// Recorded for `L2` and `SelfCorrect`.
    pub t: Option<f64>,
}

impl ClassParams {
    pub fn k(&self) -> usize {
        self.theta.len()
    }

    pub fn v(&self) -> usize {
        self.theta.first().map_or(0, Vec::len)
    }
}

/// Weighted counts before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCounts {
    /// `numerators[i][j] = Σ_x w_i(x) x_j`
    pub numerators: Vec<Vec<f64>>,
    /// `denominators[i] = Σ_x w_i(x) m(x)`, accumulated from document lengths.
    pub denominators: Vec<f64>,
}

impl WeightedCounts {
    fn zeros(k: usize, v: usize) -> Self {
        WeightedCounts {
            numerators: vec![vec![0.0; v]; k],
            denominators: vec![0.0; k],
        }
    }

    #[inline]
    fn add(&mut self, record: &LabeledRecord, class: usize, weight: f64) -> Result<()> {
        let row = &mut self.numerators[class];
        let v = row.len();
        for &(j, x) in record.doc().counts() {
            let cell = row.get_mut(j).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "document {:?} has term index {j} >= v = {}",
                    record.doc().doc_id(),
                    v
                ))
            })?;
            *cell += weight * f64::from(x);
        }
        self.denominators[class] += weight * record.doc().length() as f64;
        Ok(())
    }

    fn add_positive(&mut self, record: &LabeledRecord) -> Result<()> {
        let class = record.positive_class().ok_or_else(|| {
            Error::InvalidLabel(format!(
                "record {:?} is not positively labeled",
                record.doc().doc_id()
            ))
        })?;
        if class >= self.numerators.len() {
            return Err(Error::ClassIndex {
                index: class,
                k: self.numerators.len(),
            });
        }
        self.add(record, class, 1.0)
    }
}

fn check_k(record: &LabeledRecord, k: usize) -> Result<()> {
    if record.k() != k {
        return Err(Error::InvalidLabel(format!(
            "record {:?} has {} label entries, expected {k}",
            record.doc().doc_id(),
            record.k()
        )));
    }
    Ok(())
}

/// Class-wise term counts of the positive records.
pub fn nb_counts<'a, I>(s1: I, k: usize, v: usize) -> Result<WeightedCounts>
where
    I: IntoIterator<Item = &'a LabeledRecord>,
{
    let mut acc = WeightedCounts::zeros(k, v);
    for rec in s1 {
        check_k(rec, k)?;
        acc.add_positive(rec)?;
    }
    Ok(acc)
}

/// Positive counts plus fractional negative-record counts. The S1 part is
/// accumulated exactly as in [`nb_counts`], before any S2 contribution.
pub fn l1_counts<'a, I, J>(s1: I, s2: J, k: usize, v: usize) -> Result<WeightedCounts>
where
    I: IntoIterator<Item = &'a LabeledRecord>,
    J: IntoIterator<Item = &'a LabeledRecord>,
{
    let mut acc = nb_counts(s1, k, v)?;
    for rec in s2 {
        check_k(rec, k)?;
        for i in 0..k {
            let w = l1_weight(rec.z(), i);
            if w != 0.0 {
                acc.add(rec, i, w)?;
            }
        }
    }
    Ok(acc)
}

/// Counts with weight `y_i + t - z_i` over every record.
pub fn l2_counts<'a, I>(records: I, k: usize, v: usize, t: f64) -> Result<WeightedCounts>
where
    I: IntoIterator<Item = &'a LabeledRecord>,
{
    let mut acc = WeightedCounts::zeros(k, v);
    for rec in records {
        check_k(rec, k)?;
        for i in 0..k {
            let w = f64::from(rec.y()[i]) + t - f64::from(rec.z()[i]);
            acc.add(rec, i, w)?;
        }
    }
    Ok(acc)
}

/// Counts with weight `2 y_i + t - 1` over the positive records.
pub fn self_correct_counts<'a, I>(s1: I, k: usize, v: usize, t: f64) -> Result<WeightedCounts>
where
    I: IntoIterator<Item = &'a LabeledRecord>,
{
    let mut acc = WeightedCounts::zeros(k, v);
    for rec in s1 {
        check_k(rec, k)?;
        if rec.positive_class().is_none() {
            return Err(Error::InvalidLabel(format!(
                "record {:?} is not positively labeled",
                rec.doc().doc_id()
            )));
        }
        for i in 0..k {
            let w = 2.0 * f64::from(rec.y()[i]) + t - 1.0;
            acc.add(rec, i, w)?;
        }
    }
    Ok(acc)
}

/// Row-normalizes `numerators` with additive smoothing:
/// `θ_ij = (n_ij + α) / (Σ_j n_ij + α v)`.
pub fn apply_smoothing(numerators: &[Vec<f64>], alpha: f64, classes: &ClassSet) -> Result<Vec<Vec<f64>>> {
    numerators
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let v = row.len() as f64;
            let total: f64 = row.iter().sum::<f64>() + alpha * v;
            if !(total > 0.0) {
                return Err(Error::ZeroDenominator {
                    class: classes.name(i).to_owned(),
                });
            }
            Ok(row.iter().map(|&n| (n + alpha) / total).collect())
        })
        .collect()
}

/// Class priors from the positive records.
pub fn estimate_priors<'a, I>(s1: I, k: usize, mode: PriorMode) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a LabeledRecord>,
{
    match mode {
        PriorMode::Uniform => Ok(vec![1.0 / k as f64; k]),
        PriorMode::FromS1 => {
            let mut counts = vec![0usize; k];
            let mut n = 0usize;
            for rec in s1 {
                if let Some(c) = rec.positive_class() {
                    if c < k {
                        counts[c] += 1;
                        n += 1;
                    }
                }
            }
            if n == 0 {
                return Err(Error::InvalidArgument(
                    "prior mode from_s1 needs positive (S1) records; use uniform priors".into(),
                ));
            }
            let denom = (n + k) as f64;
            Ok(counts.iter().map(|&c| (c + 1) as f64 / denom).collect())
        }
    }
}

fn finish(
    counts: WeightedCounts,
    priors: Vec<f64>,
    classes: &ClassSet,
    config: &EstimatorConfig,
    estimator: EstimatorKind,
) -> Result<ClassParams> {
    let theta = apply_smoothing(&counts.numerators, config.smoothing_alpha, classes)?;
    Ok(ClassParams {
        theta,
        priors,
        smoothing_alpha: config.smoothing_alpha,
        estimator,
        t: estimator.uses_t().then_some(config.t),
    })
}

fn require_positive(n_s1: usize, estimator: EstimatorKind) -> Result<()> {
    if n_s1 == 0 {
        return Err(Error::InvalidArgument(format!(
            "estimator {estimator} needs positively labeled (S1) records; none were given"
        )));
    }
    Ok(())
}

/// Standard multinomial Naive Bayes from positive records.
pub fn estimate_nb(s1: &[LabeledRecord], classes: &ClassSet, v: usize, config: &EstimatorConfig) -> Result<ClassParams> {
    config.check_alpha()?;
    require_positive(s1.len(), EstimatorKind::Nb)?;
    let counts = nb_counts(s1, classes.k(), v)?;
    let priors = estimate_priors(s1, classes.k(), config.prior_mode)?;
    finish(counts, priors, classes, config, EstimatorKind::Nb)
}

/// Positive records plus negative records spread evenly over the classes
/// they do not exclude.
pub fn estimate_l1(
    s1: &[LabeledRecord],
    s2: &[LabeledRecord],
    classes: &ClassSet,
    v: usize,
    config: &EstimatorConfig,
) -> Result<ClassParams> {
    config.check_alpha()?;
    let counts = l1_counts(s1, s2, classes.k(), v)?;
    let priors = estimate_priors(s1, classes.k(), config.prior_mode)?;
    finish(counts, priors, classes, config, EstimatorKind::L1)
}

/// Likelihood-ratio estimator over all records.
pub fn estimate_l2(records: &[LabeledRecord], classes: &ClassSet, v: usize, config: &EstimatorConfig) -> Result<ClassParams> {
    config.check_alpha()?;
    config.check_t()?;
    let counts = l2_counts(records, classes.k(), v, config.t)?;
    let s1 = records.iter().filter(|r| r.origin() == Origin::S1);
    let priors = estimate_priors(s1, classes.k(), config.prior_mode)?;
    finish(counts, priors, classes, config, EstimatorKind::L2)
}

/// Likelihood-ratio estimator on positive data with `z = 1 - y`.
pub fn estimate_self_correct(
    s1: &[LabeledRecord],
    classes: &ClassSet,
    v: usize,
    config: &EstimatorConfig,
) -> Result<ClassParams> {
    config.check_alpha()?;
    config.check_t()?;
    require_positive(s1.len(), EstimatorKind::SelfCorrect)?;
    let counts = self_correct_counts(s1, classes.k(), v, config.t)?;
    let priors = estimate_priors(s1, classes.k(), config.prior_mode)?;
    finish(counts, priors, classes, config, EstimatorKind::SelfCorrect)
}

/// Fits `estimator` on a dataset. NB and SelfCorrect use the S1 records only.
pub fn fit(
    estimator: EstimatorKind,
    dataset: &PartialDataset,
    v: usize,
    config: &EstimatorConfig,
) -> Result<ClassParams> {
    let (s1, s2): (Vec<LabeledRecord>, Vec<LabeledRecord>) = dataset
        .records
        .iter()
        .cloned()
        .partition(|r| r.origin() == Origin::S1);
    fit_split(estimator, &s1, &s2, &dataset.classes, v, config)
}

/// Like [`fit`] for records already separated by origin.
pub fn fit_split(
    estimator: EstimatorKind,
    s1: &[LabeledRecord],
    s2: &[LabeledRecord],
    classes: &ClassSet,
    v: usize,
    config: &EstimatorConfig,
) -> Result<ClassParams> {
    match estimator {
        EstimatorKind::Nb => estimate_nb(s1, classes, v, config),
        EstimatorKind::L1 => estimate_l1(s1, s2, classes, v, config),
        EstimatorKind::SelfCorrect => estimate_self_correct(s1, classes, v, config),
        EstimatorKind::L2 => {
            config.check_alpha()?;
            config.check_t()?;
            let counts = l2_counts(s1.iter().chain(s2), classes.k(), v, config.t)?;
            let priors = estimate_priors(s1, classes.k(), config.prior_mode)?;
            finish(counts, priors, classes, config, EstimatorKind::L2)
        }
    }
}

/// Records `z = 1 - y` on every positive record, so that the generic
/// likelihood-ratio weight `y_i + t - z_i` becomes `2 y_i + t - 1`.
#[cfg(test)]
pub(crate) fn mirror_positive(s1: &[LabeledRecord]) -> Vec<LabeledRecord> {
    s1.iter()
        .map(|r| {
            let z = r.y().iter().map(|&b| 1 - b).collect();
            LabeledRecord::from_parts_unchecked(r.doc().clone(), r.y().to_vec(), z, Origin::S2)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Model files

/// A trained model with the class and vocabulary context it was fit in.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub classes: ClassSet,
    pub vocab: Vocabulary,
    pub params: ClassParams,
}

#[derive(Serialize)]
struct ModelOut<'a> {
    classes: &'a ClassSet,
    vocab: &'a Vocabulary,
    estimator: EstimatorKind,
    t: Option<Box<RawValue>>,
    alpha: Box<RawValue>,
    priors: Vec<Box<RawValue>>,
    theta: Vec<Vec<Box<RawValue>>>,
}

#[derive(Deserialize)]
struct ModelIn {
    classes: ClassSet,
    vocab: Vocabulary,
    estimator: EstimatorKind,
    t: Option<f64>,
    alpha: f64,
    priors: Vec<f64>,
    theta: Vec<Vec<f64>>,
}

/// Formats a finite float with 17 significant digits.
pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}

fn raw(x: f64) -> Box<RawValue> {
    RawValue::from_string(format_g17(x)).expect("finite float is a valid JSON number")
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        let p = &self.params;
        if p.theta.iter().flatten().chain(&p.priors).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("model contains non-finite numbers".into()));
        }
        let out = ModelOut {
            classes: &self.classes,
            vocab: &self.vocab,
            estimator: p.estimator,
            t: p.t.map(raw),
            alpha: raw(p.smoothing_alpha),
            priors: p.priors.iter().copied().map(raw).collect(),
            theta: p
                .theta
                .iter()
                .map(|row| row.iter().copied().map(raw).collect())
                .collect(),
        };
        Ok(serde_json::to_string(&out)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ModelIn = serde_json::from_str(s)?;
        let k = m.classes.k();
        let v = m.vocab.len();
        if m.priors.len() != k || m.theta.len() != k || m.theta.iter().any(|r| r.len() != v) {
            return Err(Error::InvalidArgument(format!(
                "model shape mismatch: expected {k} classes x {v} terms"
            )));
        }
        Ok(Model {
            classes: m.classes,
            vocab: m.vocab,
            params: ClassParams {
                theta: m.theta,
                priors: m.priors,
                smoothing_alpha: m.alpha,
                estimator: m.estimator,
                t: m.t,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
