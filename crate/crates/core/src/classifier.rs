//! Scoring, prediction and per-class accuracy reports.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocVector;
use crate::error::{Error, Result};
use crate::estimators::ClassParams;
use crate::labeling::{ClassSet, LabeledRecord};

/// Stand-in for `log 0`. Finite so that scores stay comparable and
/// serializable; any class holding it loses to every class that does not.
pub const NEG_INF_SCORE: f64 = f64::MIN;

/// `log P(C_i) + Σ_j x_j log θ_ij` for every class.
pub fn log_score(doc: &DocVector, params: &ClassParams) -> Vec<f64> {
    params
        .theta
        .iter()
        .zip(&params.priors)
        .map(|(row, &prior)| {
            if prior <= 0.0 {
                return NEG_INF_SCORE;
            }
            let mut score = prior.ln();
            for &(j, x) in doc.counts() {
                let p = row.get(j).copied().unwrap_or(0.0);
                if p <= 0.0 {
                    return NEG_INF_SCORE;
                }
                score += f64::from(x) * p.ln();
            }
            score
        })
        .collect()
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn predict(doc: &DocVector, params: &ClassParams) -> usize {
    argmax(&log_score(doc, params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub scores: Vec<f64>,
    pub predicted: usize,
    pub true_class: Option<usize>,
}

/// Scores every document, in input order.
pub fn predict_all(docs: &[(&DocVector, Option<usize>)], params: &ClassParams) -> Vec<Prediction> {
    docs.par_iter()
        .map(|&(doc, true_class)| {
            let scores = log_score(doc, params);
            Prediction {
                doc_id: doc.doc_id().to_owned(),
                predicted: argmax(&scores),
                scores,
                true_class,
            }
        })
        .collect()
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    #[serde(rename = "true")]
    truth: Option<&'a str>,
    pred: &'a str,
    scores: &'a [f64],
}

/// Writes `{"id", "true", "pred", "scores"}` lines with class names.
pub fn write_predictions<W: Write>(out: &mut W, predictions: &[Prediction], classes: &ClassSet) -> Result<()> {
    for p in predictions {
        let line = PredictionLine {
            id: &p.doc_id,
            truth: p.true_class.map(|c| classes.name(c)),
            pred: classes.name(p.predicted),
            scores: &p.scores,
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<predictions>", e))?;
    }
    Ok(())
}

/// Per-class recall, macro/micro accuracy and confusion counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` for classes absent from the test set.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub class_counts: Vec<usize>,
    /// Mean of the per-class accuracies of classes present in the test set.
    pub macro_accuracy: f64,
    pub micro_accuracy: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
}

impl EvalReport {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>, k: usize) -> Result<Self> {
        let mut confusion = vec![vec![0usize; k]; k];
        let mut n_test = 0;
        for (truth, pred) in pairs {
            if truth >= k {
                return Err(Error::ClassIndex { index: truth, k });
            }
            confusion[truth][pred] += 1;
            n_test += 1;
        }
        if n_test == 0 {
            return Err(Error::InvalidArgument("test set is empty".into()));
        }
        let class_counts: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
        let per_class_accuracy: Vec<Option<f64>> = (0..k)
            .map(|i| (class_counts[i] > 0).then(|| confusion[i][i] as f64 / class_counts[i] as f64))
            .collect();
        let present: Vec<f64> = per_class_accuracy.iter().flatten().copied().collect();
        let macro_accuracy = present.iter().sum::<f64>() / present.len() as f64;
        let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
        Ok(EvalReport {
            per_class_accuracy,
            class_counts,
            macro_accuracy,
            micro_accuracy: correct as f64 / n_test as f64,
            confusion,
            n_test,
        })
    }

    /// One row per class followed by `macro` and `micro` summary rows.
    pub fn to_csv(&self, classes: &ClassSet) -> String {
        let mut out = String::from("class,count,correct,accuracy\n");
        for (i, acc) in self.per_class_accuracy.iter().enumerate() {
            let acc = acc.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_field(classes.name(i)),
                self.class_counts[i],
                self.confusion[i][i],
                acc
            );
        }
        let correct: usize = (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum();
        let _ = writeln!(out, "macro,{},{},{}", self.n_test, correct, self.macro_accuracy);
        let _ = writeln!(out, "micro,{},{},{}", self.n_test, correct, self.micro_accuracy);
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Evaluates `params` on positively labeled test records.
pub fn evaluate(test: &[LabeledRecord], params: &ClassParams) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let k = params.k();
    let pairs: Vec<Result<(usize, usize)>> = test
        .par_iter()
        .map(|rec| {
            let truth = rec.positive_class().ok_or_else(|| {
                Error::InvalidLabel(format!(
                    "test record {:?} has no ground-truth class",
                    rec.doc().doc_id()
                ))
            })?;
            Ok((truth, predict(rec.doc(), params)))
        })
        .collect();
    let pairs: Vec<(usize, usize)> = pairs.into_iter().collect::<Result<_>>()?;
    EvalReport::from_pairs(pairs, k)
}
