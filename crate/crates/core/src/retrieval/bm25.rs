use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Length normalization.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Lower-cases and splits on anything that is not alphanumeric. No stemming,
/// no stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Per-document BM25 statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Bm25Stats {
    pub params: Bm25Params,
    pub term_counts: Vec<BTreeMap<String, u32>>,
    pub lengths: Vec<u32>,
    pub doc_freq: BTreeMap<String, u32>,
    pub avg_len: f64,
}

impl Bm25Stats {
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, params: Bm25Params) -> Self {
        let mut term_counts = Vec::new();
        let mut lengths = Vec::new();
        let mut doc_freq: BTreeMap<String, u32> = BTreeMap::new();
        for text in texts {
            let tokens = tokenize(text);
            lengths.push(tokens.len() as u32);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *counts.entry(t).or_default() += 1;
            }
            for term in counts.keys() {
                *doc_freq.entry(term.clone()).or_default() += 1;
            }
            term_counts.push(counts);
        }
        let total: u64 = lengths.iter().map(|&l| l as u64).sum();
        let avg_len = if lengths.is_empty() { 0.0 } else { total as f64 / lengths.len() as f64 };
        Bm25Stats { params, term_counts, lengths, doc_freq, avg_len }
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, which stays positive for terms
    /// that occur in most paragraphs.
    fn idf(&self, term: &str) -> f64 {
        let n = self.lengths.len() as f64;
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Scores every paragraph against the distinct terms of `query`.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let Bm25Params { k1, b } = self.params;
        let mut scores = vec![0.0; self.lengths.len()];
        for term in &terms {
            if !self.doc_freq.contains_key(term) {
                continue;
            }
            let idf = self.idf(term);
            for (i, counts) in self.term_counts.iter().enumerate() {
                let Some(&tf) = counts.get(term) else { continue };
                let tf = tf as f64;
                let norm = if self.avg_len > 0.0 { self.lengths[i] as f64 / self.avg_len } else { 0.0 };
                scores[i] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
            }
        }
        scores
    }
}
