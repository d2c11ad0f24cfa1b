use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::normalize::{normalize_answer, normalized_tokens};
use super::EvalError;
use crate::domain::NormalizationRule;

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub const ZERO: Prf = Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    pub const ONE: Prf = Prf {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };

    /// From an overlap count and the two sizes. Both empty counts as a match.
    pub fn from_counts(overlap: usize, predicted: usize, reference: usize) -> Prf {
        match (predicted, reference) {
            (0, 0) => Prf::ONE,
            (0, _) | (_, 0) => Prf::ZERO,
            _ if overlap == 0 => Prf::ZERO,
            _ => {
                let precision = overlap as f64 / predicted as f64;
                let recall = overlap as f64 / reference as f64;
                Prf {
                    precision,
                    recall,
                    f1: 2.0 * precision * recall / (precision + recall),
                }
            }
        }
    }
}

/// 1 when the normalized prediction equals any normalized gold.
pub fn exact_match(pred: &str, gold: &[String], rules: &[NormalizationRule]) -> f64 {
    let p = normalize_answer(pred, rules);
    f64::from(gold.iter().any(|g| normalize_answer(g, rules) == p) as u8)
}

/// 1 when any nonempty normalized gold occurs inside the normalized prediction.
pub fn contains_match(pred: &str, gold: &[String], rules: &[NormalizationRule]) -> f64 {
    let p = normalize_answer(pred, rules);
    let hit = gold.iter().any(|g| {
        let g = normalize_answer(g, rules);
        !g.is_empty() && p.contains(&g)
    });
    f64::from(hit as u8)
}

/// First label character in `pred` that stands alone: not adjacent to another
/// letter or digit. Parentheses and punctuation count as boundaries.
pub fn choice_extract(pred: &str, labels: &[String]) -> Option<String> {
    let chars: Vec<char> = pred.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        if !labels.iter().any(|l| l.chars().eq(std::iter::once(*c))) {
            continue;
        }
        let before = i == 0 || !chars[i - 1].is_alphanumeric();
        let after = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
        if before && after {
            return Some(c.to_string());
        }
    }
    None
}

/// Multiset overlap of normalized tokens.
pub fn token_prf(pred: &str, gold: &str, rules: &[NormalizationRule]) -> Prf {
    let p = normalized_tokens(pred, rules);
    let g = normalized_tokens(gold, rules);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut overlap = 0;
    for t in &p {
        if let Some(n) = counts.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    Prf::from_counts(overlap, p.len(), g.len())
}

/// ROUGE-L over normalized token sequences.
pub fn rouge_l(pred: &str, gold: &str, rules: &[NormalizationRule]) -> Prf {
    let p = normalized_tokens(pred, rules);
    let g = normalized_tokens(gold, rules);
    Prf::from_counts(lcs_len(&p, &g), p.len(), g.len())
}

/// Longest common subsequence length, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Unbiased pass@k: `1 - C(n-c, k) / C(n, k)`, evaluated as a running product
/// so it stays finite for large `n`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, EvalError> {
    if c > n {
        return Err(EvalError::Precondition(format!("c={c} exceeds n={n}")));
    }
    if k < 1 || k > n {
        return Err(EvalError::Precondition(format!("k={k} must lie in [1, n={n}]")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}

fn citation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[(\d+)\]").expect("static regex"))
}

/// Citation markers `[i]` found in `text`.
pub fn extract_citations(text: &str) -> BTreeSet<u64> {
    citation_re()
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

/// Set precision/recall of cited ids against the gold ids.
pub fn citation_prf(pred: &str, gold: &BTreeSet<u64>) -> Prf {
    let cited = extract_citations(pred);
    let overlap = cited.intersection(gold).count();
    Prf::from_counts(overlap, cited.len(), gold.len())
}

/// Fraction of gold values present as substrings of the normalized prediction.
pub fn needle_recall(pred: &str, gold: &[String], rules: &[NormalizationRule]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let p = normalize_answer(pred, rules);
    let found = gold
        .iter()
        .filter(|g| {
            let g = normalize_answer(g, rules);
            !g.is_empty() && p.contains(&g)
        })
        .count();
    found as f64 / gold.len() as f64
}
