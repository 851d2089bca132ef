//! Positive and negative partial labels, dataset splits and the JSONL
//! partial-label dataset format.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, DocVector, Vocabulary};
use crate::error::{Error, Result};
use crate::rng;

/// Ordered set of class names, `k >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ClassSet {
    names: Vec<String>,
}

impl TryFrom<Vec<String>> for ClassSet {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        ClassSet::new(names)
    }
}

impl From<ClassSet> for Vec<String> {
    fn from(c: ClassSet) -> Self {
        c.names
    }
}

impl ClassSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {}",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate class name {n:?}")));
            }
        }
        Ok(ClassSet { names })
    }

    /// Classes named `c0 .. c{k-1}`, for synthetic data.
    pub fn numbered(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| format!("c{i}")))
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    /// Positively labeled: exactly one `y_i = 1`.
    S1,
    /// Negatively labeled: between 1 and k-1 entries `z_i = 1`.
    S2,
}

/// A document with its positive (`y`) and negative (`z`) indicator vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    doc: DocVector,
    y: Vec<u8>,
    z: Vec<u8>,
    origin: Origin,
}

impl LabeledRecord {
    /// Validates the label invariants for the given origin.
    pub fn new(doc: DocVector, y: Vec<u8>, z: Vec<u8>, origin: Origin) -> Result<Self> {
        if y.len() != z.len() {
            return Err(Error::InvalidLabel(format!(
                "y has {} entries but z has {}",
                y.len(),
                z.len()
            )));
        }
        let k = y.len();
        if y.iter().chain(&z).any(|&b| b > 1) {
            return Err(Error::InvalidLabel("labels must be 0/1".into()));
        }
        let sy: usize = y.iter().map(|&b| b as usize).sum();
        let sz: usize = z.iter().map(|&b| b as usize).sum();
        match origin {
            Origin::S1 if sy != 1 || sz != 0 => {
                return Err(Error::InvalidLabel(format!(
                    "S1 record {:?} needs exactly one positive label and no negatives",
                    doc.doc_id()
                )))
            }
            Origin::S2 if sy != 0 || sz == 0 || sz > k.saturating_sub(1) => {
                return Err(Error::InvalidLabel(format!(
                    "S2 record {:?} needs 1..={} negative labels and no positives",
                    doc.doc_id(),
                    k.saturating_sub(1)
                )))
            }
            _ => {}
        }
        Ok(LabeledRecord { doc, y, z, origin })
    }

    /// Positive record `y = e_class`.
    pub fn positive(doc: DocVector, class: usize, k: usize) -> Result<Self> {
        if class >= k {
            return Err(Error::ClassIndex { index: class, k });
        }
        let mut y = vec![0; k];
        y[class] = 1;
        Ok(LabeledRecord {
            doc,
            y,
            z: vec![0; k],
            origin: Origin::S1,
        })
    }

    /// Negative record with `z_i = 1` for each listed class.
    pub fn negative(doc: DocVector, negated: &[usize], k: usize) -> Result<Self> {
        let mut z = vec![0; k];
        for &i in negated {
            if i >= k {
                return Err(Error::ClassIndex { index: i, k });
            }
            z[i] = 1;
        }
        LabeledRecord::new(doc, vec![0; k], z, Origin::S2)
    }

    /// Record with no labels at all (`y = z = 0`), filed under S2. It adds
    /// weight `t` to every class in the likelihood-ratio estimator and `1/k`
    /// to every class in L1.
    pub fn unlabeled(doc: DocVector, k: usize) -> Self {
        LabeledRecord {
            doc,
            y: vec![0; k],
            z: vec![0; k],
            origin: Origin::S2,
        }
    }

    /// Builds a record without checking label invariants. Used for the
    /// `z = 1 - y` construction on positive data.
    #[cfg(test)]
    pub(crate) fn from_parts_unchecked(doc: DocVector, y: Vec<u8>, z: Vec<u8>, origin: Origin) -> Self {
        LabeledRecord { doc, y, z, origin }
    }

    pub fn doc(&self) -> &DocVector {
        &self.doc
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn k(&self) -> usize {
        self.y.len()
    }

    /// The positive class of an S1 record.
    pub fn positive_class(&self) -> Option<usize> {
        self.y.iter().position(|&b| b == 1)
    }

    pub fn negated_classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.z.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i)
    }
}

/// Positive-label record for `doc` in class `class_index`.
pub fn make_s1_record(doc: DocVector, class_index: usize, classes: &ClassSet) -> Result<LabeledRecord> {
    LabeledRecord::positive(doc, class_index, classes.k())
}

/// `S = S1 ∪ S2` over a fixed class set.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDataset {
    pub classes: ClassSet,
    pub records: Vec<LabeledRecord>,
}

impl PartialDataset {
    pub fn new(classes: ClassSet, records: Vec<LabeledRecord>) -> Result<Self> {
        let k = classes.k();
        if let Some(bad) = records.iter().find(|r| r.k() != k) {
            return Err(Error::InvalidLabel(format!(
                "record {:?} has {} label entries, expected {k}",
                bad.doc().doc_id(),
                bad.k()
            )));
        }
        Ok(PartialDataset { classes, records })
    }

    pub fn k(&self) -> usize {
        self.classes.k()
    }

    pub fn s1(&self) -> impl Iterator<Item = &LabeledRecord> {
        self.records.iter().filter(|r| r.origin == Origin::S1)
    }

    pub fn s2(&self) -> impl Iterator<Item = &LabeledRecord> {
        self.records.iter().filter(|r| r.origin == Origin::S2)
    }

    pub fn s1_size(&self) -> usize {
        self.s1().count()
    }

    pub fn s2_size(&self) -> usize {
        self.s2().count()
    }

    /// Largest term index referenced by any record.
    pub fn max_term_index(&self) -> Option<usize> {
        self.records.iter().filter_map(|r| r.doc().max_index()).max()
    }
}

/// Draws one class uniformly from the `k - 1` classes other than `true_class`.
pub(crate) fn draw_other_class<R: rand::Rng + ?Sized>(rng: &mut R, true_class: usize, k: usize) -> usize {
    let r = rng.random_range(0..k - 1);
    if r >= true_class {
        r + 1
    } else {
        r
    }
}

/// For every positive record, emits one negative record that negates a single
/// class drawn uniformly from the classes other than its true class.
///
/// Record `n` uses random stream `(seed, n)`.
pub fn synthesize_negative_labels(records: &[LabeledRecord], seed: u64) -> Result<Vec<LabeledRecord>> {
    records
        .par_iter()
        .enumerate()
        .map(|(n, rec)| {
            let k = rec.k();
            let truth = rec.positive_class().ok_or_else(|| {
                Error::InvalidLabel(format!(
                    "record {:?} has no known true class",
                    rec.doc().doc_id()
                ))
            })?;
            if k < 2 {
                return Err(Error::InvalidArgument("need k >= 2".into()));
            }
            let mut r = rng::substream(seed, n as u64);
            let negated = draw_other_class(&mut r, truth, k);
            LabeledRecord::negative(rec.doc().clone(), &[negated], k)
        })
        .collect()
}

/// Output of [`split_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub s1: Vec<LabeledRecord>,
    pub s2: Vec<LabeledRecord>,
    /// Held-out documents as positive records carrying ground truth.
    pub test: Vec<LabeledRecord>,
}

impl Split {
    pub fn training(&self, classes: &ClassSet) -> PartialDataset {
        let mut records = self.s1.clone();
        records.extend(self.s2.iter().cloned());
        PartialDataset {
            classes: classes.clone(),
            records,
        }
    }
}

const SPLIT_SHUFFLE: u64 = 1;
const SPLIT_NEGATIVES: u64 = 2;

/// Stratified train/test split followed by an S1/S2 split of the training
/// part. Training documents not kept in S1 receive one synthesized negative
/// label each.
pub fn split_dataset(
    docs: &[(DocVector, usize)],
    classes: &ClassSet,
    train_frac: f64,
    s1_frac_of_train: f64,
    seed: u64,
) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_frac must be in (0, 1), got {train_frac}"
        )));
    }
    if !(0.0..=1.0).contains(&s1_frac_of_train) {
        return Err(Error::InvalidArgument(format!(
            "s1_frac_of_train must be in [0, 1], got {s1_frac_of_train}"
        )));
    }
    let k = classes.k();
    let mut by_class: Vec<Vec<&DocVector>> = vec![Vec::new(); k];
    for (doc, class) in docs {
        if *class >= k {
            return Err(Error::ClassIndex { index: *class, k });
        }
        by_class[*class].push(doc);
    }

    let shuffle_seed = rng::derive_seed(seed, SPLIT_SHUFFLE);
    let mut s1 = Vec::new();
    let mut to_negate = Vec::new();
    let mut test = Vec::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        let n = members.len();
        if n < 2 {
            return Err(Error::TooFewDocuments {
                class: classes.name(class).to_owned(),
                count: n,
                needed: 2,
            });
        }
        members.shuffle(&mut rng::substream(shuffle_seed, class as u64));
        let n_train = ((train_frac * n as f64).round() as usize).clamp(1, n - 1);
        let n_s1 = (s1_frac_of_train * n_train as f64).round() as usize;
        for (pos, doc) in members.iter().enumerate() {
            let rec = LabeledRecord::positive((*doc).clone(), class, k)?;
            if pos < n_s1 {
                s1.push(rec);
            } else if pos < n_train {
                to_negate.push(rec);
            } else {
                test.push(rec);
            }
        }
    }
    let s2 = synthesize_negative_labels(&to_negate, rng::derive_seed(seed, SPLIT_NEGATIVES))?;
    Ok(Split { s1, s2, test })
}

/// Fractional class-`i` weight of a negatively labeled record:
/// `(1 - z_i) / (k - sum_{l != i} z_l)`.
pub fn l1_weight(z: &[u8], i: usize) -> f64 {
    let k = z.len();
    let others: usize = z
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != i)
        .map(|(_, &b)| b as usize)
        .sum();
    (1.0 - f64::from(z[i])) / (k - others) as f64
}

// ---------------------------------------------------------------------------
// JSONL partial-label dataset files

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    classes: ClassSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocab: Option<Vocabulary>,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<std::collections::BTreeMap<usize, u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Origin>,
}

/// Contents of a dataset file.
#[derive(Debug, Clone)]
pub struct DatasetFile {
    pub classes: ClassSet,
    /// Vocabulary stored in the header, if any.
    pub vocab: Option<Vocabulary>,
    pub records: Vec<LabeledRecord>,
    /// Documents carrying neither positive nor negative labels.
    pub unlabeled: Vec<DocVector>,
}

impl DatasetFile {
    pub fn dataset(&self) -> PartialDataset {
        PartialDataset {
            classes: self.classes.clone(),
            records: self.records.clone(),
        }
    }
}

/// Writes a dataset file. Records are stored as sparse counts.
pub fn write_dataset(
    path: &Path,
    classes: &ClassSet,
    vocab: Option<&Vocabulary>,
    records: &[LabeledRecord],
    unlabeled: &[DocVector],
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = DatasetHeader {
        classes: classes.clone(),
        vocab: vocab.cloned(),
    };
    let io_err = |e| Error::io(path, e);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io_err)?;
    let lines = records
        .iter()
        .map(|r| RecordLine {
            id: r.doc().doc_id().to_owned(),
            counts: Some(r.doc().counts().iter().copied().collect()),
            text: None,
            y: Some(r.y().to_vec()),
            z: Some(r.z().to_vec()),
            origin: Some(r.origin()),
        })
        .chain(unlabeled.iter().map(|d| RecordLine {
            id: d.doc_id().to_owned(),
            counts: Some(d.counts().iter().copied().collect()),
            text: None,
            y: None,
            z: None,
            origin: None,
        }));
    for line in lines {
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads a dataset file. Records given as `text` are vectorized with the
/// header vocabulary, or with `fallback_vocab` when the header has none.
pub fn read_dataset(path: &Path, fallback_vocab: Option<&Vocabulary>) -> Result<DatasetFile> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header: DatasetHeader = loop {
        match lines.next() {
            None => return Err(Error::parse(path, 1, "missing {\"classes\": [...]} header")),
            Some((n, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
            }
        }
    };
    let k = header.classes.k();
    let vocab = header.vocab.as_ref().or(fallback_vocab);
    let mut records = Vec::new();
    let mut unlabeled = Vec::new();
    for (n, line) in lines {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        let perr = |msg: String| Error::parse(path, lineno, msg);
        let doc = match (parsed.counts, parsed.text) {
            (Some(counts), None) => {
                if let (Some(v), Some((&max, _))) = (vocab, counts.last_key_value()) {
                    if max >= v.len() {
                        return Err(perr(format!(
                            "term index {max} out of range for vocabulary of {}",
                            v.len()
                        )));
                    }
                }
                DocVector::from_counts(parsed.id, counts).map_err(|e| perr(e.to_string()))?
            }
            (None, Some(text)) => {
                let v = vocab.ok_or_else(|| perr("text record but no vocabulary available".into()))?;
                corpus::vectorize_text(&parsed.id, &text, v).map_err(|e| perr(e.to_string()))?
            }
            _ => return Err(perr("record needs exactly one of \"counts\" or \"text\"".into())),
        };
        let y = parsed.y.unwrap_or_else(|| vec![0; k]);
        let z = parsed.z.unwrap_or_else(|| vec![0; k]);
        if y.len() != k || z.len() != k {
            return Err(perr(format!("label vectors must have {k} entries")));
        }
        let has_y = y.iter().any(|&b| b != 0);
        let has_z = z.iter().any(|&b| b != 0);
        let origin = match parsed.origin {
            Some(o) => o,
            None if has_y => Origin::S1,
            None if has_z => Origin::S2,
            None => {
                unlabeled.push(doc);
                continue;
            }
        };
        records.push(LabeledRecord::new(doc, y, z, origin).map_err(|e| perr(e.to_string()))?);
    }
    Ok(DatasetFile {
        classes: header.classes,
        vocab: header.vocab,
        records,
        unlabeled,
    })
}
