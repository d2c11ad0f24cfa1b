use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{MetricKind, NormalizationRule, TaskInstance};
use crate::eval::normalize_answer;
use crate::hash::derive_seed;

const DECOYS: [&str; 8] = [
    "unknown", "marigold", "lantern", "harbor", "copper", "meadow", "quartz", "willow",
];

/// Deterministic stand-in for a model. With probability `accuracy` (drawn
/// from a stream seeded by `(instance_id, seed)`) the answer embeds the gold;
/// otherwise it is a wrong answer of the same shape.
pub fn mock_oracle_complete(instance: &TaskInstance, accuracy: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&instance.instance_id, seed));
    let correct = rng.random::<f64>() < accuracy;
    let kind = &instance.metric.kind;

    if correct {
        return render(kind, &instance.gold);
    }

    let wrong: Vec<String> = match kind {
        MetricKind::Choice => {
            let labels: Vec<String> = match &instance.choices {
                Some(c) if !c.is_empty() => c.iter().map(|(l, _)| l.clone()).collect(),
                _ => ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect(),
            };
            let others: Vec<&String> = labels.iter().filter(|l| !instance.gold.contains(l)).collect();
            match others.is_empty() {
                true => vec![],
                false => vec![others[rng.random_range(0..others.len())].clone()],
            }
        }
        MetricKind::CitationPrf => {
            let max = instance
                .gold
                .iter()
                .filter_map(|g| g.parse::<u64>().ok())
                .max()
                .unwrap_or(0);
            vec![(max + 1 + rng.random_range(0..3)).to_string()]
        }
        _ => {
            let taken: BTreeSet<&str> = instance
                .gold
                .iter()
                .flat_map(|g| g.split_whitespace())
                .collect();
            instance
                .gold
                .iter()
                .map(|g| {
                    g.split_whitespace()
                        .map(|tok| perturb_token(tok, &taken, &mut rng))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect()
        }
    };

    let out = render(kind, &wrong);
    let rules = NormalizationRule::ALL;
    let norm_out = normalize_answer(&out, &rules);
    let leaks = instance.gold.iter().any(|g| {
        let ng = normalize_answer(g, &rules);
        !ng.is_empty() && norm_out.contains(&ng)
    });
    if leaks || wrong.is_empty() {
        "I could not find the answer.".to_string()
    } else {
        out
    }
}

fn render(kind: &MetricKind, answers: &[String]) -> String {
    match kind {
        // token-overlap and exact metrics are scored against the bare answer
        MetricKind::Exact | MetricKind::TokenF1 | MetricKind::RougeL => {
            answers.first().cloned().unwrap_or_default()
        }
        MetricKind::Choice => format!("The answer is ({}).", answers.first().map_or("", |s| s)),
        MetricKind::CitationPrf => {
            let cites: String = answers.iter().map(|a| format!("[{a}]")).collect();
            format!("This is supported by the passages {cites}.")
        }
        _ => format!("The answer is {}.", answers.join(", ")),
    }
}

fn perturb_token(tok: &str, taken: &BTreeSet<&str>, rng: &mut ChaCha8Rng) -> String {
    if !tok.is_empty() && tok.chars().all(|c| c.is_ascii_digit()) {
        let len = tok.len() as u32;
        let (lo, hi) = if len == 1 { (0, 10) } else { (10u64.pow(len - 1), 10u64.pow(len)) };
        for _ in 0..64 {
            let cand = rng.random_range(lo..hi).to_string();
            if !taken.contains(cand.as_str()) {
                return cand;
            }
        }
        return "0".repeat(len as usize + 1);
    }
    let start = rng.random_range(0..DECOYS.len());
    (0..DECOYS.len())
        .map(|i| DECOYS[(start + i) % DECOYS.len()])
        .find(|d| !taken.contains(d))
        .unwrap_or("nothing")
        .to_string()
}
