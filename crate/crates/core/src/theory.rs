//! Closed-form bias and variance of the estimators, and a seeded Monte Carlo
//! engine over synthetic fixed-length multinomial corpora that measures them.
//!
//! Synthetic S2 records are described by a joint table over
//! `(negated class set, true class)`. Two generative schemes are supported:
//!
//! * [`SchemeKind::TrueClass`]: the true class is drawn from the priors and
//!   `k_count` of the remaining classes are negated uniformly at random. This
//!   mirrors how negative labels are synthesized for real corpora.
//! * [`SchemeKind::UniformOther`]: the negated set is drawn first and the
//!   document comes uniformly from one of the classes not negated. The
//!   closed-form L2 moments assume this scheme.
//!
//! With [`Allocation::Stratified`] the number of records in every cell is
//! fixed by largest-remainder apportionment, so class sizes are constants
//! rather than random variables, matching the conditioning of the closed
//! forms. [`Allocation::Sampled`] draws every cell independently.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocVector;
use crate::error::{Error, Result};
use crate::estimators::{fit_split, ClassParams, EstimatorConfig, EstimatorKind, PriorMode};
use crate::labeling::{ClassSet, LabeledRecord, PartialDataset};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    #[default]
    TrueClass,
    UniformOther,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeScheme {
    /// Number of classes negated by every S2 record.
    pub k_count: usize,
    #[serde(default)]
    pub kind: SchemeKind,
    /// `UniformOther` with `k_count = 1` only: distribution of the negated
    /// class. Uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negated_probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    #[default]
    Sampled,
    Stratified,
}

/// Ground truth of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k: usize,
    pub v: usize,
    /// Tokens per document.
    pub m: u64,
    pub theta_true: Vec<Vec<f64>>,
    pub priors_true: Vec<f64>,
    pub negative_scheme: NegativeScheme,
    pub n1: usize,
    pub n2: usize,
    #[serde(default)]
    pub allocation: Allocation,
}

/// One cell of the S2 joint table.
#[derive(Debug, Clone, PartialEq)]
pub struct S2Cell {
    pub negated: Vec<usize>,
    pub true_class: usize,
    pub prob: f64,
}

fn prob_vector_ok(p: &[f64]) -> bool {
    p.iter().all(|&x| x >= 0.0 && x.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

fn binomial_coefficient(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn subsets(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    fn go(items: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for idx in start..items.len() {
            cur.push(items[idx]);
            go(items, size, idx + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(items, size, 0, &mut Vec::with_capacity(size), &mut out);
    out
}

/// Largest-remainder apportionment of `n` items over `weights`; ties go to
/// the lower index.
pub fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || weights.is_empty() {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &idx in order.iter().take(n.saturating_sub(assigned)) {
        counts[idx] += 1;
    }
    counts
}

const MAX_S2_CELLS: usize = 100_000;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.k < 2 {
            return bad(format!("k must be >= 2, got {}", self.k));
        }
        if self.v < 1 || self.m < 1 {
            return bad("v and m must be >= 1".into());
        }
        if self.theta_true.len() != self.k || self.theta_true.iter().any(|r| r.len() != self.v) {
            return bad(format!("theta_true must be {} x {}", self.k, self.v));
        }
        if let Some(i) = self.theta_true.iter().position(|r| !prob_vector_ok(r)) {
            return bad(format!("theta_true row {i} is not a probability vector"));
        }
        if self.priors_true.len() != self.k || !prob_vector_ok(&self.priors_true) {
            return bad("priors_true must be a probability vector of length k".into());
        }
        let s = &self.negative_scheme;
        if s.k_count < 1 || s.k_count > self.k - 1 {
            return bad(format!("k_count must be in 1..={}", self.k - 1));
        }
        if let Some(q) = &s.negated_probs {
            if s.kind != SchemeKind::UniformOther || s.k_count != 1 {
                return bad("negated_probs needs the uniform_other scheme with k_count = 1".into());
            }
            if q.len() != self.k || !prob_vector_ok(q) {
                return bad("negated_probs must be a probability vector of length k".into());
            }
        }
        if binomial_coefficient(self.k, s.k_count) * self.k as f64 > MAX_S2_CELLS as f64 {
            return bad("negative scheme has too many (negated set, class) cells".into());
        }
        if self.n1 + self.n2 == 0 {
            return bad("n1 + n2 must be >= 1".into());
        }
        Ok(())
    }

    pub fn classes(&self) -> ClassSet {
        ClassSet::numbered(self.k).expect("k >= 2 after validation")
    }

    /// Joint distribution of `(negated set, true class)` for S2 records.
    pub fn s2_cells(&self) -> Vec<S2Cell> {
        let k = self.k;
        let kc = self.negative_scheme.k_count;
        let mut cells = Vec::new();
        match self.negative_scheme.kind {
            SchemeKind::TrueClass => {
                let per_set = 1.0 / binomial_coefficient(k - 1, kc);
                for c in 0..k {
                    let others: Vec<usize> = (0..k).filter(|&l| l != c).collect();
                    for negated in subsets(&others, kc) {
                        cells.push(S2Cell {
                            negated,
                            true_class: c,
                            prob: self.priors_true[c] * per_set,
                        });
                    }
                }
            }
            SchemeKind::UniformOther => {
                let all: Vec<usize> = (0..k).collect();
                for negated in subsets(&all, kc) {
                    let p_set = match &self.negative_scheme.negated_probs {
                        Some(q) => q[negated[0]],
                        None => 1.0 / binomial_coefficient(k, kc),
                    };
                    for c in (0..k).filter(|c| !negated.contains(c)) {
                        cells.push(S2Cell {
                            negated: negated.clone(),
                            true_class: c,
                            prob: p_set / (k - kc) as f64,
                        });
                    }
                }
            }
        }
        cells
    }

    /// Per-class S1 record counts: exact for stratified allocation, expected
    /// otherwise.
    pub fn s1_class_sizes(&self) -> Vec<f64> {
        match self.allocation {
            Allocation::Stratified => apportion(self.n1, &self.priors_true)
                .into_iter()
                .map(|c| c as f64)
                .collect(),
            Allocation::Sampled => self.priors_true.iter().map(|p| p * self.n1 as f64).collect(),
        }
    }

    /// Record counts per S2 cell: exact for stratified allocation, expected
    /// otherwise.
    pub fn s2_cell_sizes(&self) -> Vec<(S2Cell, f64)> {
        let cells = self.s2_cells();
        let sizes: Vec<f64> = match self.allocation {
            Allocation::Stratified => {
                let w: Vec<f64> = cells.iter().map(|c| c.prob).collect();
                apportion(self.n2, &w).into_iter().map(|c| c as f64).collect()
            }
            Allocation::Sampled => cells.iter().map(|c| c.prob * self.n2 as f64).collect(),
        };
        cells.into_iter().zip(sizes).collect()
    }

    /// `(|C_i|, |R_i|, K_weight, l_i)` for class `i`, where `R_i` are the S2
    /// records with `z_i = 0`, `K_weight = 1 / (k - k_count)` is their class-`i`
    /// weight and `l_ij` is their mean normalized count of term `j`.
    pub fn l1_ground_truth(&self, i: usize) -> L1GroundTruth {
        let class_size = self.s1_class_sizes()[i];
        let mut r = 0.0;
        let mut l = vec![0.0; self.v];
        for (cell, size) in self.s2_cell_sizes() {
            if !cell.negated.contains(&i) {
                r += size;
                for (lj, &th) in l.iter_mut().zip(&self.theta_true[cell.true_class]) {
                    *lj += size * th;
                }
            }
        }
        if r > 0.0 {
            l.iter_mut().for_each(|x| *x /= r);
        }
        L1GroundTruth {
            class_size,
            r_size: r,
            k_weight: 1.0 / (self.k - self.negative_scheme.k_count) as f64,
            l,
        }
    }

    /// `(p, q)` with `p_i = |C_i| / |S|` and `q_i = |D_i| / |S|`, `D_i` the
    /// S2 records negating class `i`.
    pub fn l2_fractions(&self) -> (Vec<f64>, Vec<f64>) {
        let total = (self.n1 + self.n2) as f64;
        let p = self.s1_class_sizes().iter().map(|c| c / total).collect();
        let mut q = vec![0.0; self.k];
        for (cell, size) in self.s2_cell_sizes() {
            for &a in &cell.negated {
                q[a] += size / total;
            }
        }
        (p, q)
    }

    /// Same generative model with `n_total` records split in the template's
    /// S1:S2 ratio.
    pub fn scaled(&self, n_total: usize) -> SyntheticSpec {
        let frac = self.n1 as f64 / (self.n1 + self.n2) as f64;
        let n1 = (frac * n_total as f64).round() as usize;
        SyntheticSpec {
            n1,
            n2: n_total - n1,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1GroundTruth {
    pub class_size: f64,
    pub r_size: f64,
    pub k_weight: f64,
    pub l: Vec<f64>,
}

/// Draws `x ~ Multinomial(m, theta_row)` by sequential binomial conditionals.
pub fn generate_document(doc_id: impl Into<String>, theta_row: &[f64], m: u64, rng: &mut Rng) -> DocVector {
    let mut counts = Vec::with_capacity(theta_row.len());
    let mut remaining = m;
    let mut mass = 1.0;
    let last = theta_row.len() - 1;
    for (j, &p) in theta_row.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let x = if j == last {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            let cond = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, cond).expect("probability in [0, 1]").sample(rng)
        };
        if x > 0 {
            counts.push((j, x as u32));
        }
        remaining -= x;
        mass -= p;
    }
    DocVector::from_counts(doc_id, counts).expect("m >= 1")
}

/// Synthetic records split by origin.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub s1: Vec<LabeledRecord>,
    pub s2: Vec<LabeledRecord>,
    /// True class of each S2 record.
    pub s2_truth: Vec<usize>,
}

fn sample_parts(spec: &SyntheticSpec, rng: &mut Rng) -> SyntheticSample {
    let k = spec.k;
    let mut s1 = Vec::with_capacity(spec.n1);
    let s1_classes: Vec<usize> = match spec.allocation {
        Allocation::Stratified => apportion(spec.n1, &spec.priors_true)
            .into_iter()
            .enumerate()
            .flat_map(|(c, n)| std::iter::repeat_n(c, n))
            .collect(),
        Allocation::Sampled => {
            let dist = WeightedIndex::new(&spec.priors_true).expect("valid priors");
            (0..spec.n1).map(|_| dist.sample(rng)).collect()
        }
    };
    for (n, c) in s1_classes.into_iter().enumerate() {
        let doc = generate_document(format!("s1-{n}"), &spec.theta_true[c], spec.m, rng);
        s1.push(LabeledRecord::positive(doc, c, k).expect("class < k"));
    }

    let cells = spec.s2_cells();
    let s2_cells: Vec<usize> = match spec.allocation {
        Allocation::Stratified => {
            let w: Vec<f64> = cells.iter().map(|c| c.prob).collect();
            apportion(spec.n2, &w)
                .into_iter()
                .enumerate()
                .flat_map(|(c, n)| std::iter::repeat_n(c, n))
                .collect()
        }
        Allocation::Sampled if spec.n2 > 0 => {
            let dist = WeightedIndex::new(cells.iter().map(|c| c.prob)).expect("valid cells");
            (0..spec.n2).map(|_| dist.sample(rng)).collect()
        }
        Allocation::Sampled => Vec::new(),
    };
    let mut s2 = Vec::with_capacity(spec.n2);
    let mut s2_truth = Vec::with_capacity(spec.n2);
    for (n, idx) in s2_cells.into_iter().enumerate() {
        let cell = &cells[idx];
        let doc = generate_document(format!("s2-{n}"), &spec.theta_true[cell.true_class], spec.m, rng);
        s2.push(LabeledRecord::negative(doc, &cell.negated, k).expect("valid negated set"));
        s2_truth.push(cell.true_class);
    }
    SyntheticSample { s1, s2, s2_truth }
}

/// Draws a synthetic sample from random stream `(seed, ordinal)`.
pub fn generate_sample(spec: &SyntheticSpec, seed: u64, ordinal: u64) -> Result<SyntheticSample> {
    spec.validate()?;
    Ok(sample_parts(spec, &mut rng::substream(seed, ordinal)))
}

/// Draws a synthetic partial-label dataset.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec, seed: u64) -> Result<PartialDataset> {
    let sample = generate_sample(spec, seed, 0)?;
    let mut records = sample.s1;
    records.extend(sample.s2);
    PartialDataset::new(spec.classes(), records)
}

// ---------------------------------------------------------------------------
// Closed forms

/// Variance of the Naive Bayes estimate: `θ(1-θ) / (|C_i| m)`.
pub fn analytic_nb_variance(theta_ij: f64, class_size: f64, m: f64) -> f64 {
    theta_ij * (1.0 - theta_ij) / (class_size * m)
}

/// Bias of the L1 estimate: `|R_i| K (l_ij - θ_ij) / (|C_i| + |R_i| K)`.
pub fn analytic_l1_bias(theta_ij: f64, l_ij: f64, class_size: f64, r_size: f64, k_weight: f64) -> f64 {
    r_size * k_weight * (l_ij - theta_ij) / (class_size + r_size * k_weight)
}

fn m_term(theta: &[Vec<f64>], l: usize, j: usize) -> f64 {
    theta.iter().map(|row| row[j]).sum::<f64>() - theta[l][j]
}

/// Expectation of the L2 estimate for entry `(i, j)` under the uniform-other
/// negative scheme, with `p` and `q` the S1 and S2 class fractions of `|S|`.
pub fn analytic_l2_expectation(theta: &[Vec<f64>], p: &[f64], q: &[f64], t: f64, i: usize, j: usize) -> f64 {
    let k = theta.len();
    let km1 = (k - 1) as f64;
    let pooled: f64 = (0..k).map(|l| p[l] * theta[l][j]).sum();
    let negated: f64 = (0..k).map(|l| q[l] * m_term(theta, l, j) / km1).sum();
    let numerator = t * pooled + p[i] * theta[i][j] + t * negated - q[i] * m_term(theta, i, j) / km1;
    numerator / (p[i] - q[i] + t)
}

/// Variance of the L2 estimate for entry `(i, j)`, ignoring covariances
/// between documents and using `Σ θ(1-θ) / (k-1)^2` as the per-document
/// variance of negatively labeled documents.
#[allow(clippy::too_many_arguments)]
pub fn analytic_l2_variance(
    theta: &[Vec<f64>],
    p: &[f64],
    q: &[f64],
    t: f64,
    m: f64,
    n_total: f64,
    i: usize,
    j: usize,
) -> f64 {
    let k = theta.len();
    let km1sq = ((k - 1) * (k - 1)) as f64;
    let bern = |l: usize| theta[l][j] * (1.0 - theta[l][j]);
    let others_of = |l: usize| (0..k).filter(|&b| b != l).map(bern).sum::<f64>();
    let a = (1.0 + 2.0 * t) * p[i] * bern(i);
    let b = (1.0 - 2.0 * t) * q[i] / km1sq * others_of(i);
    let c = t * t * (0..k).map(|l| p[l] * bern(l)).sum::<f64>();
    let d = t * t * (0..k).map(|l| q[l] / km1sq * others_of(l)).sum::<f64>();
    let denom = p[i] - q[i] + t;
    (a + b + c + d) / (m * n_total * denom * denom)
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Monte Carlo moments of an estimator, entry by entry (`k x v`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorStats {
    pub estimator: EstimatorKind,
    pub t: Option<f64>,
    pub trials: u64,
    pub mean: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
    /// Sample variance (divisor `trials - 1`).
    pub variance: Vec<Vec<f64>>,
    /// Mean of `(θ̂ - θ)^2`.
    pub mse: Vec<Vec<f64>>,
    /// Standard error of `mean`.
    pub standard_error: Vec<Vec<f64>>,
}

impl EstimatorStats {
    fn mean_of(m: &[Vec<f64>]) -> f64 {
        let n: usize = m.iter().map(Vec::len).sum();
        m.iter().flatten().sum::<f64>() / n as f64
    }

    pub fn mean_variance(&self) -> f64 {
        Self::mean_of(&self.variance)
    }

    pub fn mean_mse(&self) -> f64 {
        Self::mean_of(&self.mse)
    }

    /// Mean over classes of the Euclidean norm of the class's bias row.
    pub fn mean_bias_l2norm(&self) -> f64 {
        let norms: f64 = self
            .bias
            .iter()
            .map(|row| row.iter().map(|b| b * b).sum::<f64>().sqrt())
            .sum();
        norms / self.bias.len() as f64
    }
}

/// Welford accumulator over flattened `k x v` estimates.
struct Moments {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    sq_err: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
            sq_err: vec![0.0; len],
        }
    }

    fn push(&mut self, x: &[f64], truth: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for e in 0..x.len() {
            let delta = x[e] - self.mean[e];
            self.mean[e] += delta / n;
            self.m2[e] += delta * (x[e] - self.mean[e]);
            let err = x[e] - truth[e];
            self.sq_err[e] += err * err;
        }
    }

    fn finish(self, spec: &SyntheticSpec, estimator: EstimatorKind, t: Option<f64>) -> EstimatorStats {
        let (k, v) = (spec.k, spec.v);
        let n = self.n as f64;
        let reshape = |flat: Vec<f64>| flat.chunks(v).map(<[f64]>::to_vec).collect::<Vec<_>>();
        let truth: Vec<f64> = spec.theta_true.iter().flatten().copied().collect();
        let variance: Vec<f64> = self.m2.iter().map(|m2| m2 / (n - 1.0)).collect();
        let se: Vec<f64> = variance.iter().map(|var| (var / n).sqrt()).collect();
        let bias: Vec<f64> = self.mean.iter().zip(&truth).map(|(m, th)| m - th).collect();
        let mse: Vec<f64> = self.sq_err.iter().map(|s| s / n).collect();
        debug_assert_eq!(self.mean.len(), k * v);
        EstimatorStats {
            estimator,
            t,
            trials: self.n,
            mean: reshape(self.mean),
            bias: reshape(bias),
            variance: reshape(variance),
            mse: reshape(mse),
            standard_error: reshape(se),
        }
    }
}

/// An estimator and its configuration, as run by the Monte Carlo engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorRun {
    pub estimator: EstimatorKind,
    pub config: EstimatorConfig,
}

impl EstimatorRun {
    /// Unsmoothed estimator with the given `t`.
    pub fn exact(estimator: EstimatorKind, t: f64) -> Self {
        EstimatorRun {
            estimator,
            config: EstimatorConfig::exact(t),
        }
    }
}

fn flat_theta(params: &ClassParams) -> Vec<f64> {
    params.theta.iter().flatten().copied().collect()
}

/// Runs every estimator on the same `trials` synthetic datasets. Trial `n`
/// draws from random stream `(master_seed, n)`; results are accumulated in
/// trial order, so they do not depend on the thread count.
pub fn monte_carlo_multi(
    spec: &SyntheticSpec,
    runs: &[EstimatorRun],
    trials: u64,
    master_seed: u64,
) -> Result<Vec<EstimatorStats>> {
    spec.validate()?;
    if trials < 2 {
        return Err(Error::InvalidArgument(format!("trials must be >= 2, got {trials}")));
    }
    for run in runs {
        if run.config.smoothing_alpha != 0.0 {
            return Err(Error::InvalidArgument(
                "Monte Carlo verification needs smoothing_alpha = 0".into(),
            ));
        }
    }
    let classes = spec.classes();
    let runs: Vec<EstimatorRun> = runs
        .iter()
        .map(|r| EstimatorRun {
            config: EstimatorConfig {
                prior_mode: PriorMode::Uniform,
                ..r.config
            },
            ..*r
        })
        .collect();

    // Fixed-size blocks of trials: each block is processed sequentially and
    // blocks are merged in order.
    const BLOCK: u64 = 256;
    let n_blocks = trials.div_ceil(BLOCK);
    let blocks: Vec<Result<Vec<Vec<Vec<f64>>>>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(trials);
            let mut per_run = vec![Vec::with_capacity((hi - lo) as usize); runs.len()];
            for trial in lo..hi {
                let sample = sample_parts(spec, &mut rng::substream(master_seed, trial));
                for (slot, run) in per_run.iter_mut().zip(&runs) {
                    let params = fit_split(run.estimator, &sample.s1, &sample.s2, &classes, spec.v, &run.config)
                        .map_err(|e| Error::Trial {
                            trial,
                            seed: master_seed,
                            source: Box::new(e),
                        })?;
                    slot.push(flat_theta(&params));
                }
            }
            Ok(per_run)
        })
        .collect();

    let truth: Vec<f64> = spec.theta_true.iter().flatten().copied().collect();
    let mut moments: Vec<Moments> = runs.iter().map(|_| Moments::new(truth.len())).collect();
    for block in blocks {
        for (acc, estimates) in moments.iter_mut().zip(block?) {
            for x in &estimates {
                acc.push(x, &truth);
            }
        }
    }
    Ok(moments
        .into_iter()
        .zip(&runs)
        .map(|(m, run)| m.finish(spec, run.estimator, run.estimator.uses_t().then_some(run.config.t)))
        .collect())
}

/// Monte Carlo moments of a single estimator.
pub fn monte_carlo_stats(
    spec: &SyntheticSpec,
    estimator: EstimatorKind,
    config: &EstimatorConfig,
    trials: u64,
    master_seed: u64,
) -> Result<EstimatorStats> {
    let run = EstimatorRun {
        estimator,
        config: *config,
    };
    Ok(monte_carlo_multi(spec, &[run], trials, master_seed)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub estimator: EstimatorKind,
    pub n_total: usize,
    pub n1: usize,
    pub n2: usize,
    pub t: Option<f64>,
    pub trials: u64,
    pub mean_bias_l2norm: f64,
    pub mean_variance: f64,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSlope {
    pub estimator: EstimatorKind,
    pub t: Option<f64>,
    /// Least-squares slope of `ln(mean MSE)` against `ln |S|`.
    pub mse_slope: f64,
    /// Least-squares slope of `ln(mean variance)` against `ln |S|`.
    pub variance_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<ConvergenceSlope>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Monte Carlo moments at increasing total sample sizes. Size `s` (by
/// position) uses master seed `derive_seed(seed, s)`.
pub fn convergence_study(
    template: &SyntheticSpec,
    sample_sizes: &[usize],
    runs: &[EstimatorRun],
    trials: u64,
    seed: u64,
) -> Result<ConvergenceTable> {
    if sample_sizes.len() < 2 || sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sample_sizes must hold at least two strictly increasing sizes".into(),
        ));
    }
    let mut per_run: Vec<Vec<ConvergenceRow>> = vec![Vec::new(); runs.len()];
    for (pos, &n_total) in sample_sizes.iter().enumerate() {
        let spec = template.scaled(n_total);
        let stats = monte_carlo_multi(&spec, runs, trials, rng::derive_seed(seed, pos as u64))?;
        for (rows, st) in per_run.iter_mut().zip(stats) {
            rows.push(ConvergenceRow {
                estimator: st.estimator,
                n_total,
                n1: spec.n1,
                n2: spec.n2,
                t: st.t,
                trials,
                mean_bias_l2norm: st.mean_bias_l2norm(),
                mean_variance: st.mean_variance(),
                mean_mse: st.mean_mse(),
            });
        }
    }
    let xs: Vec<f64> = sample_sizes.iter().map(|&n| n as f64).collect();
    let slopes = per_run
        .iter()
        .map(|rows| {
            let mse: Vec<f64> = rows.iter().map(|r| r.mean_mse).collect();
            let var: Vec<f64> = rows.iter().map(|r| r.mean_variance).collect();
            ConvergenceSlope {
                estimator: rows[0].estimator,
                t: rows[0].t,
                mse_slope: log_log_slope(&xs, &mse),
                variance_slope: log_log_slope(&xs, &var),
            }
        })
        .collect();
    Ok(ConvergenceTable {
        rows: per_run.into_iter().flatten().collect(),
        slopes,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "estimator,n_total,n1,n2,t,trial_count,mean_bias_l2norm,mean_variance,mean_mse,slope,variance_slope\n",
        );
        for row in &self.rows {
            let slope = self
                .slopes
                .iter()
                .find(|s| s.estimator == row.estimator && s.t == row.t)
                .expect("slope for every estimator");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                row.estimator,
                row.n_total,
                row.n1,
                row.n2,
                opt(row.t),
                row.trials,
                row.mean_bias_l2norm,
                row.mean_variance,
                row.mean_mse,
                slope.mse_slope,
                slope.variance_slope
            );
        }
        out
    }
}

/// Per-entry CSV of several stats blocks.
pub fn stats_to_csv(spec: &SyntheticSpec, stats: &[EstimatorStats]) -> String {
    let mut out =
        String::from("estimator,t,class,term,theta_true,mean,bias,variance,mse,standard_error,trials\n");
    for st in stats {
        for i in 0..spec.k {
            for j in 0..spec.v {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    st.estimator,
                    opt(st.t),
                    i,
                    j,
                    spec.theta_true[i][j],
                    st.mean[i][j],
                    st.bias[i][j],
                    st.variance[i][j],
                    st.mse[i][j],
                    st.standard_error[i][j],
                    st.trials
                );
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Checks

pub const MEAN_TOLERANCE_SE: f64 = 3.0;
pub const VARIANCE_RELATIVE_TOLERANCE: f64 = 0.05;
pub const VARIANCE_CHECK_THETA_RANGE: (f64, f64) = (0.05, 0.95);
pub const SLOPE_RANGE: (f64, f64) = (-1.2, -0.8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Naive Bayes bias within 3 SE of zero.
    NbUnbiased,
    /// Naive Bayes variance within 5% of `θ(1-θ)/(|C_i| m)`.
    NbVariance,
    /// L1 bias within 3 SE of its closed form.
    L1Bias,
    /// L2 mean within 3 SE of its closed form at every `t`, and mean
    /// absolute bias nondecreasing in `t`.
    L2Expectation,
    /// Log-log variance slope within [-1.2, -0.8] for every estimator.
    VarianceSlope,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Verification job as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    pub synthetic: SyntheticSpec,
    pub checks: Vec<CheckKind>,
    #[serde(default = "default_t_values")]
    pub t_values: Vec<f64>,
    /// Total sample sizes for the slope check.
    #[serde(default)]
    pub sample_sizes: Vec<usize>,
    /// Estimators for the slope check.
    #[serde(default = "default_slope_estimators")]
    pub slope_estimators: Vec<EstimatorKind>,
}

fn default_t_values() -> Vec<f64> {
    vec![crate::estimators::DEFAULT_T]
}

fn default_slope_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Nb, EstimatorKind::L1, EstimatorKind::L2]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub stats: Vec<EstimatorStats>,
    pub convergence: Option<ConvergenceTable>,
    pub checks: Vec<CheckResult>,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Largest violation ratio `|observed - expected| / (3 SE)` over entries.
fn worst_se_ratio(stats: &EstimatorStats, expected: impl Fn(usize, usize) -> f64) -> (f64, (usize, usize)) {
    let mut worst = (0.0, (0, 0));
    for (i, row) in stats.mean.iter().enumerate() {
        for (j, &m) in row.iter().enumerate() {
            let se = stats.standard_error[i][j];
            let dev = (m - expected(i, j)).abs();
            let ratio = if se > 0.0 {
                dev / (MEAN_TOLERANCE_SE * se)
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if ratio > worst.0 {
                worst = (ratio, (i, j));
            }
        }
    }
    worst
}

pub fn check_nb_unbiased(spec: &SyntheticSpec, nb: &EstimatorStats) -> CheckResult {
    let (ratio, (i, j)) = worst_se_ratio(nb, |i, j| spec.theta_true[i][j]);
    CheckResult {
        name: "nb_unbiased".into(),
        passed: ratio <= 1.0,
        detail: format!("worst |bias| / 3SE = {ratio:.3} at ({i},{j})"),
    }
}

pub fn check_nb_variance(spec: &SyntheticSpec, nb: &EstimatorStats) -> CheckResult {
    let sizes = spec.s1_class_sizes();
    let (lo, hi) = VARIANCE_CHECK_THETA_RANGE;
    let mut worst = (0.0, (0, 0));
    for i in 0..spec.k {
        for j in 0..spec.v {
            let th = spec.theta_true[i][j];
            if !(lo..=hi).contains(&th) {
                continue;
            }
            let expected = analytic_nb_variance(th, sizes[i], spec.m as f64);
            let rel = (nb.variance[i][j] - expected).abs() / expected;
            if rel > worst.0 {
                worst = (rel, (i, j));
            }
        }
    }
    CheckResult {
        name: "nb_variance".into(),
        passed: worst.0 <= VARIANCE_RELATIVE_TOLERANCE,
        detail: format!(
            "worst relative error = {:.4} at {:?} (limit {VARIANCE_RELATIVE_TOLERANCE})",
            worst.0, worst.1
        ),
    }
}

pub fn check_l1_bias(spec: &SyntheticSpec, l1: &EstimatorStats) -> CheckResult {
    let truths: Vec<L1GroundTruth> = (0..spec.k).map(|i| spec.l1_ground_truth(i)).collect();
    let (ratio, (i, j)) = worst_se_ratio(l1, |i, j| {
        let g = &truths[i];
        spec.theta_true[i][j] + analytic_l1_bias(spec.theta_true[i][j], g.l[j], g.class_size, g.r_size, g.k_weight)
    });
    CheckResult {
        name: "l1_bias".into(),
        passed: ratio <= 1.0,
        detail: format!("worst |bias - closed form| / 3SE = {ratio:.3} at ({i},{j})"),
    }
}

/// Expects one L2 stats block per entry of `t_values`, in order.
pub fn check_l2_expectation(spec: &SyntheticSpec, t_values: &[f64], l2: &[EstimatorStats]) -> Vec<CheckResult> {
    let (p, q) = spec.l2_fractions();
    let mut out = Vec::new();
    let mut mean_abs_bias = Vec::new();
    for (&t, st) in t_values.iter().zip(l2) {
        let (ratio, (i, j)) = worst_se_ratio(st, |i, j| analytic_l2_expectation(&spec.theta_true, &p, &q, t, i, j));
        out.push(CheckResult {
            name: format!("l2_expectation[t={t}]"),
            passed: ratio <= 1.0,
            detail: format!("worst |mean - closed form| / 3SE = {ratio:.3} at ({i},{j})"),
        });
        let abs: f64 = st.bias.iter().flatten().map(|b| b.abs()).sum();
        mean_abs_bias.push(abs / (spec.k * spec.v) as f64);
    }
    let mut order: Vec<usize> = (0..t_values.len()).collect();
    order.sort_by(|&a, &b| t_values[a].total_cmp(&t_values[b]));
    let monotone = order.windows(2).all(|w| mean_abs_bias[w[1]] >= mean_abs_bias[w[0]]);
    out.push(CheckResult {
        name: "l2_bias_monotone_in_t".into(),
        passed: monotone,
        detail: format!(
            "mean |bias| by increasing t: {:?}",
            order.iter().map(|&o| mean_abs_bias[o]).collect::<Vec<_>>()
        ),
    });
    out
}

pub fn check_variance_slopes(table: &ConvergenceTable) -> Vec<CheckResult> {
    let (lo, hi) = SLOPE_RANGE;
    table
        .slopes
        .iter()
        .map(|s| CheckResult {
            name: format!("variance_slope[{}]", s.estimator),
            passed: (lo..=hi).contains(&s.variance_slope),
            detail: format!(
                "variance slope {:.4}, MSE slope {:.4} (range [{lo}, {hi}])",
                s.variance_slope, s.mse_slope
            ),
        })
        .collect()
}

/// Runs the configured checks.
pub fn run_theory_checks(config: &TheoryConfig, trials: u64, seed: u64) -> Result<TheoryReport> {
    let spec = &config.synthetic;
    let t_default = crate::estimators::DEFAULT_T;
    let wants = |c: CheckKind| config.checks.contains(&c);
    let mut runs = Vec::new();
    if wants(CheckKind::NbUnbiased) || wants(CheckKind::NbVariance) {
        runs.push(EstimatorRun::exact(EstimatorKind::Nb, t_default));
    }
    if wants(CheckKind::L1Bias) {
        runs.push(EstimatorRun::exact(EstimatorKind::L1, t_default));
    }
    if wants(CheckKind::L2Expectation) {
        for &t in &config.t_values {
            runs.push(EstimatorRun::exact(EstimatorKind::L2, t));
        }
    }
    let stats = if runs.is_empty() {
        Vec::new()
    } else {
        monte_carlo_multi(spec, &runs, trials, seed)?
    };
    let find = |kind: EstimatorKind| stats.iter().find(|s| s.estimator == kind);
    let mut checks = Vec::new();
    if let Some(nb) = find(EstimatorKind::Nb) {
        if wants(CheckKind::NbUnbiased) {
            checks.push(check_nb_unbiased(spec, nb));
        }
        if wants(CheckKind::NbVariance) {
            checks.push(check_nb_variance(spec, nb));
        }
    }
    if let Some(l1) = find(EstimatorKind::L1) {
        checks.push(check_l1_bias(spec, l1));
    }
    if wants(CheckKind::L2Expectation) {
        let l2: Vec<EstimatorStats> = stats
            .iter()
            .filter(|s| s.estimator == EstimatorKind::L2)
            .cloned()
            .collect();
        checks.extend(check_l2_expectation(spec, &config.t_values, &l2));
    }
    let convergence = if wants(CheckKind::VarianceSlope) {
        let slope_runs: Vec<EstimatorRun> = config
            .slope_estimators
            .iter()
            .map(|&e| EstimatorRun::exact(e, t_default))
            .collect();
        let table = convergence_study(spec, &config.sample_sizes, &slope_runs, trials, seed)?;
        checks.extend(check_variance_slopes(&table));
        Some(table)
    } else {
        None
    };
    Ok(TheoryReport {
        stats,
        convergence,
        checks,
    })
}
