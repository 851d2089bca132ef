//! Raw text ingestion: tokenization, vocabularies and sparse count vectors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A document as read from disk, before vectorization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub text: String,
    /// Ground-truth class name, when the corpus carries one.
    pub source_class: Option<String>,
}

impl RawDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, class: Option<&str>) -> Self {
        RawDocument {
            doc_id: doc_id.into(),
            text: text.into(),
            source_class: class.map(str::to_owned),
        }
    }
}

/// Splits text into lowercase tokens.
///
/// Any character that is not alphanumeric separates tokens. Tokens shorter
/// than two characters and tokens made only of digits are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|tok| tok.chars().nth(1).is_some())
        .filter(|tok| !tok.chars().all(char::is_numeric))
        .map(str::to_lowercase)
        .collect()
}

/// Bidirectional term/index map with lexicographic ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from an arbitrary list of terms. Terms are sorted
    /// and deduplicated.
    pub fn from_terms<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut terms: Vec<String> = terms.into_iter().map(Into::into).collect();
        terms.sort();
        terms.dedup();
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary { min_count: 0 });
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary { terms, index })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    /// Short content hash used to detect model/data vocabulary mismatches.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for term in &self.terms {
            hasher.update(term.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.terms.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let terms = Vec::<String>::deserialize(deserializer)?;
        let sorted = terms.windows(2).all(|w| w[0] < w[1]);
        if !sorted {
            return Err(serde::de::Error::custom(
                "vocabulary terms must be distinct and sorted",
            ));
        }
        Vocabulary::from_terms(terms).map_err(serde::de::Error::custom)
    }
}

/// Sparse term-count vector of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DocVectorRepr", into = "DocVectorRepr")]
pub struct DocVector {
    doc_id: String,
    /// (term index, count) pairs, sorted by index, counts > 0.
    counts: Vec<(usize, u32)>,
    length: u64,
}

#[derive(Serialize, Deserialize)]
struct DocVectorRepr {
    id: String,
    counts: BTreeMap<usize, u32>,
}

impl TryFrom<DocVectorRepr> for DocVector {
    type Error = Error;

    fn try_from(repr: DocVectorRepr) -> Result<Self> {
        DocVector::from_counts(repr.id, repr.counts)
    }
}

impl From<DocVector> for DocVectorRepr {
    fn from(doc: DocVector) -> Self {
        DocVectorRepr {
            id: doc.doc_id,
            counts: doc.counts.into_iter().collect(),
        }
    }
}

impl DocVector {
    /// Builds a vector from (index, count) pairs. Zero counts are dropped and
    /// repeated indices are summed. Fails when the total length is zero.
    pub fn from_counts<I>(doc_id: impl Into<String>, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, u32)>,
    {
        let doc_id = doc_id.into();
        let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
        for (index, count) in counts {
            if count > 0 {
                *merged.entry(index).or_default() += count;
            }
        }
        let length = merged.values().map(|&c| u64::from(c)).sum();
        if length == 0 {
            return Err(Error::EmptyDocument { doc_id });
        }
        Ok(DocVector {
            doc_id,
            counts: merged.into_iter().collect(),
            length,
        })
    }

    /// Builds a vector from a dense count slice.
    pub fn from_dense(doc_id: impl Into<String>, dense: &[u32]) -> Result<Self> {
        Self::from_counts(doc_id, dense.iter().copied().enumerate())
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn counts(&self) -> &[(usize, u32)] {
        &self.counts
    }

    /// Total token count `m_d`.
    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn count(&self, index: usize) -> u32 {
        self.counts
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.counts[pos].1)
            .unwrap_or(0)
    }

    /// Largest stored term index, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.counts.last().map(|&(i, _)| i)
    }

    pub fn to_dense(&self, v: usize) -> Vec<u32> {
        let mut dense = vec![0; v];
        for &(i, c) in &self.counts {
            dense[i] = c;
        }
        dense
    }

    pub fn with_id(mut self, doc_id: impl Into<String>) -> Self {
        self.doc_id = doc_id.into();
        self
    }
}

/// Collects the terms whose corpus frequency is at least `min_count`.
pub fn build_vocabulary(docs: &[RawDocument], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be >= 1".into()));
    }
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        for tok in tokenize(&doc.text) {
            *freq.entry(tok).or_default() += 1;
        }
    }
    let terms: Vec<String> = freq
        .into_iter()
        .filter(|&(_, n)| n >= min_count)
        .map(|(t, _)| t)
        .collect();
    if terms.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }
    Vocabulary::from_terms(terms)
}

/// Counts the in-vocabulary tokens of a document; out-of-vocabulary tokens
/// are dropped.
pub fn vectorize(doc: &RawDocument, vocab: &Vocabulary) -> Result<DocVector> {
    vectorize_text(&doc.doc_id, &doc.text, vocab)
}

pub(crate) fn vectorize_text(doc_id: &str, text: &str, vocab: &Vocabulary) -> Result<DocVector> {
    let counts = tokenize(text)
        .into_iter()
        .filter_map(|tok| vocab.index_of(&tok))
        .map(|i| (i, 1));
    DocVector::from_counts(doc_id, counts)
}

/// Vectorizes a whole corpus in parallel, keeping input order. Documents with
/// no in-vocabulary tokens are returned separately by id.
pub fn vectorize_all(docs: &[RawDocument], vocab: &Vocabulary) -> (Vec<(usize, DocVector)>, Vec<String>) {
    let results: Vec<Result<DocVector>> = docs.par_iter().map(|d| vectorize(d, vocab)).collect();
    let mut kept = Vec::with_capacity(docs.len());
    let mut dropped = Vec::new();
    for (pos, res) in results.into_iter().enumerate() {
        match res {
            Ok(vec) => kept.push((pos, vec)),
            Err(_) => dropped.push(docs[pos].doc_id.clone()),
        }
    }
    (kept, dropped)
}

/// On-disk corpus layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    /// One JSON object per line with `id`, `text` and optional `class`.
    Jsonl,
    /// `<root>/<class>/<file>`, one plain-text document per file.
    LabeledDirs,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "labeled_dirs" | "labeled-dirs" => Ok(CorpusFormat::LabeledDirs),
            other => Err(Error::InvalidArgument(format!(
                "unknown corpus format {other:?} (expected jsonl or labeled_dirs)"
            ))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Jsonl => "jsonl",
            CorpusFormat::LabeledDirs => "labeled_dirs",
        })
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: String,
    text: String,
    #[serde(default)]
    class: Option<String>,
}

/// Reads a corpus from disk.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<RawDocument>> {
    let docs = match format {
        CorpusFormat::Jsonl => load_jsonl(path)?,
        CorpusFormat::LabeledDirs => load_labeled_dirs(path)?,
    };
    let mut seen = HashSet::with_capacity(docs.len());
    for doc in &docs {
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate document id {:?} in {}",
                doc.doc_id,
                path.display()
            )));
        }
    }
    Ok(docs)
}

fn load_jsonl(path: &Path) -> Result<Vec<RawDocument>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        docs.push(RawDocument {
            doc_id: rec.id,
            text: rec.text,
            source_class: rec.class,
        });
    }
    Ok(docs)
}

fn load_labeled_dirs(root: &Path) -> Result<Vec<RawDocument>> {
    let mut class_dirs: Vec<_> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().is_dir())
        .collect();
    class_dirs.sort_by_key(|e| e.file_name());

    let mut docs = Vec::new();
    for class_dir in class_dirs {
        let class = class_dir.file_name().to_string_lossy().into_owned();
        let walker = walkdir::WalkDir::new(class_dir.path()).sort_by_file_name();
        for entry in walker {
            let entry = entry.map_err(|e| {
                let p = e.path().unwrap_or(root).to_path_buf();
                Error::io(p, std::io::Error::other(e.to_string()))
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let bytes = fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
            let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
            let doc_id = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            docs.push(RawDocument {
                doc_id,
                text: String::from_utf8_lossy(&bytes).into_owned(),
                source_class: Some(class.clone()),
            });
        }
    }
    Ok(docs)
}
