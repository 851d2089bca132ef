#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use negbayes::rng;
use negbayes::theory::{Allocation, NegativeScheme, SchemeKind, SyntheticSpec};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::Normal;

pub const SPREAD: f64 = 0.6;

pub const THETA_K3_V5: [[f64; 5]; 3] = [
    [0.30, 0.25, 0.20, 0.15, 0.10],
    [0.10, 0.15, 0.20, 0.25, 0.30],
    [0.05, 0.40, 0.30, 0.10, 0.15],
];

/// k = 3, v = 5, m = 50, uniform priors, one negation per S2 record.
pub fn spec_k3(n1: usize, n2: usize, kind: SchemeKind) -> SyntheticSpec {
    SyntheticSpec {
        k: 3,
        v: 5,
        m: 50,
        theta_true: THETA_K3_V5.iter().map(|r| r.to_vec()).collect(),
        priors_true: vec![1.0 / 3.0; 3],
        negative_scheme: NegativeScheme {
            k_count: 1,
            kind,
            negated_probs: None,
        },
        n1,
        n2,
        allocation: Allocation::Stratified,
    }
}

fn word(mut n: usize) -> String {
    // base-26 letters, at least two of them, so the tokenizer keeps it
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (n % 26) as u8);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    while s.len() < 2 {
        s.push(b'q');
    }
    String::from_utf8(s).unwrap()
}

/// Topic-model stand-in for a newsgroup corpus: `k` classes over a Zipfian
/// background vocabulary, each class reweighting terms by independent
/// log-normal factors. Class sizes and document lengths vary.
pub fn standin_corpus_lines(k: usize, seed: u64) -> Vec<String> {
    let v = 2000;
    let mut r = rng::substream(seed, 0);
    let spread = Normal::new(0.0, SPREAD).unwrap();
    let background: Vec<f64> = (0..v).map(|j| 1.0 / (j as f64 + 10.0)).collect();
    let classes: Vec<WeightedIndex<f64>> = (0..k)
        .map(|_| {
            let w: Vec<f64> = background.iter().map(|b| b * f64::exp(spread.sample(&mut r))).collect();
            WeightedIndex::new(w).unwrap()
        })
        .collect();
    let vocab: Vec<String> = (0..v).map(word).collect();
    let mut lines = Vec::new();
    for (c, dist) in classes.iter().enumerate() {
        let n_docs = 120 + 30 * (c % 5);
        for n in 0..n_docs {
            let len = r.random_range(40..160);
            let text: Vec<&str> = (0..len).map(|_| vocab[dist.sample(&mut r)].as_str()).collect();
            lines.push(
                serde_json::json!({"id": format!("t{c}-{n}"), "text": text.join(" "), "class": format!("topic{c:02}")})
                    .to_string(),
            );
        }
    }
    lines
}

pub fn write_standin_corpus(dir: &Path, k: usize, seed: u64) -> PathBuf {
    let path = dir.join("standin.jsonl");
    fs::write(&path, standin_corpus_lines(k, seed).join("\n") + "\n").unwrap();
    path
}
