use std::collections::{BTreeSet, HashMap};

use super::{Chunk, RagError};

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Okapi BM25 statistics over a fixed chunk list.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    pub doc_count: usize,
    pub avg_doc_len: f64,
    pub doc_freq: HashMap<String, usize>,
    pub term_freq: Vec<HashMap<String, u32>>,
    pub doc_len: Vec<usize>,
    pub k1: f64,
    pub b: f64,
}

pub fn build_index(chunks: &[Chunk]) -> Result<Bm25Index, RagError> {
    build_index_with(chunks, DEFAULT_K1, DEFAULT_B)
}

pub fn build_index_with(chunks: &[Chunk], k1: f64, b: f64) -> Result<Bm25Index, RagError> {
    if chunks.is_empty() {
        return Err(RagError::EmptyCorpus);
    }
    let mut doc_freq: HashMap<String, usize> = HashMap::new();
    let mut term_freq = Vec::with_capacity(chunks.len());
    let mut doc_len = Vec::with_capacity(chunks.len());
    for c in chunks {
        let terms = tokenize(&c.text);
        doc_len.push(terms.len());
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in terms {
            *tf.entry(t).or_default() += 1;
        }
        for t in tf.keys() {
            *doc_freq.entry(t.clone()).or_default() += 1;
        }
        term_freq.push(tf);
    }
    let avg_doc_len = doc_len.iter().sum::<usize>() as f64 / chunks.len() as f64;
    Ok(Bm25Index {
        doc_count: chunks.len(),
        avg_doc_len,
        doc_freq,
        term_freq,
        doc_len,
        k1,
        b,
    })
}

impl Bm25Index {
    pub fn df(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    /// `ln((N - df + 0.5) / (df + 0.5) + 1)`, floored at 0.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.df(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln().max(0.0)
    }

    /// Sum over distinct query terms. Out-of-range chunks score 0.
    pub fn score(&self, query: &str, chunk_index: usize) -> f64 {
        let Some(tf) = self.term_freq.get(chunk_index) else {
            return 0.0;
        };
        if self.avg_doc_len == 0.0 {
            return 0.0;
        }
        let norm = 1.0 - self.b + self.b * self.doc_len[chunk_index] as f64 / self.avg_doc_len;
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        terms
            .iter()
            .filter_map(|t| tf.get(t).map(|f| (t, f64::from(*f))))
            .map(|(t, f)| self.idf(t) * f * (self.k1 + 1.0) / (f + self.k1 * norm))
            .sum()
    }

    /// Top `k` chunk indices by score (lower index wins ties), returned in
    /// document order.
    pub fn retrieve_topk(&self, query: &str, k: usize) -> Vec<usize> {
        let mut ranked: Vec<(usize, f64)> = (0..self.doc_count)
            .map(|i| (i, self.score(query, i)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut top: Vec<usize> = ranked.into_iter().take(k).map(|(i, _)| i).collect();
        top.sort_unstable();
        top
    }
}

pub fn score_bm25(index: &Bm25Index, query: &str, chunk_index: usize) -> f64 {
    index.score(query, chunk_index)
}

pub fn retrieve_topk(index: &Bm25Index, query: &str, k: usize) -> Vec<usize> {
    index.retrieve_topk(query, k)
}
