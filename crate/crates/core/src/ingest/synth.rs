//! Deterministic synthetic long-context tasks.
//!
//! Each generator weaves planted sentences into seeded filler at sentence
//! boundaries. Output is a pure function of the [`SyntheticParams`].

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use super::content_id;
use super::filler::FILLER;
use crate::domain::{GeneratorKind, MetricKind, MetricSpec, SyntheticParams, TaskInstance};
use crate::hash::derive_seed;

/// Bytes per token used to size haystacks.
const BYTES_PER_TOKEN: u64 = 4;

const ADJECTIVES: [&str; 12] = [
    "amber", "crimson", "hollow", "golden", "misty", "brave", "velvet", "frozen", "cobalt",
    "scarlet", "ivory", "jade",
];
const NOUNS: [&str; 12] = [
    "falcon", "comet", "orchid", "canyon", "otter", "pebble", "glacier", "sparrow", "tundra",
    "walrus", "zephyr", "quasar",
];

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("context of {available} bytes cannot hold {needed} bytes of planted text plus one filler sentence")]
    TooSmall { needed: u64, available: u64 },
    #[error("{needles} needles need distinct depths but only {distinct} distinct depth fractions were given")]
    DistinctDepths { needles: u32, distinct: usize },
    #[error("{needles} needles exceed the {slots} available insertion slots")]
    TooManyNeedles { needles: u32, slots: usize },
    #[error("{0}")]
    Precondition(String),
}

/// Dispatches on `p.generator`.
pub fn generate(p: &SyntheticParams) -> Result<Vec<TaskInstance>, SynthError> {
    match p.generator {
        GeneratorKind::Niah => gen_niah(p),
        GeneratorKind::MultiQueryNiah => gen_multi_query_niah(p),
        GeneratorKind::VariableTracking => gen_variable_tracking(p),
        GeneratorKind::Counting => gen_counting(p),
    }
}

fn expect_generator(p: &SyntheticParams, kind: GeneratorKind) -> Result<(), SynthError> {
    if p.generator != kind {
        return Err(SynthError::Precondition(format!(
            "params are for generator '{}', not '{}'",
            p.generator.as_str(),
            kind.as_str()
        )));
    }
    if p.instances < 1 {
        return Err(SynthError::Precondition("instances must be at least 1".into()));
    }
    Ok(())
}

fn instance_rng(kind: GeneratorKind, index: u32, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&format!("{}:{index}", kind.as_str()), seed))
}

/// Seeded run of filler sentences leaving room for `reserved` planted bytes.
fn filler(rng: &mut ChaCha8Rng, context_tokens: u64, reserved: u64) -> Result<Vec<&'static str>, SynthError> {
    let available = context_tokens.saturating_mul(BYTES_PER_TOKEN);
    let start = rng.random_range(0..FILLER.len());
    let first = FILLER[start].len() as u64 + 1;
    if reserved + first > available {
        return Err(SynthError::TooSmall {
            needed: reserved,
            available,
        });
    }
    let mut out = Vec::new();
    let mut used = reserved;
    let mut i = start;
    loop {
        let s = FILLER[i % FILLER.len()];
        let cost = s.len() as u64 + 1;
        if !out.is_empty() && used + cost > available {
            break;
        }
        out.push(s);
        used += cost;
        i += 1;
    }
    Ok(out)
}

/// Joins filler and planted sentences; a planted sentence at slot `s` goes
/// before filler sentence `s` (slot `len` is the very end). Planted
/// sentences sharing a slot keep their given order.
fn weave(filler: &[&str], planted: &[(usize, String)]) -> String {
    let mut planted: Vec<&(usize, String)> = planted.iter().collect();
    planted.sort_by_key(|(slot, _)| *slot);
    let mut parts: Vec<&str> = Vec::with_capacity(filler.len() + planted.len());
    let mut next = planted.iter().peekable();
    for slot in 0..=filler.len() {
        while let Some((_, text)) = next.next_if(|(s, _)| *s == slot) {
            parts.push(text);
        }
        if let Some(f) = filler.get(slot) {
            parts.push(f);
        }
    }
    parts.join(" ")
}

fn depth_slot(depth: f64, filler_len: usize) -> usize {
    ((depth.clamp(0.0, 1.0) * filler_len as f64).round() as usize).min(filler_len)
}

fn build(
    kind: GeneratorKind,
    context: String,
    question: String,
    gold: Vec<String>,
    metric: MetricKind,
) -> TaskInstance {
    let task_id = kind.as_str().to_string();
    let record = json!({"context": context, "question": question, "gold": gold});
    TaskInstance {
        instance_id: content_id(kind.as_str(), &task_id, &record),
        benchmark_id: kind.as_str().to_string(),
        task_id,
        context,
        question,
        gold,
        choices: None,
        metric: MetricSpec::new(metric),
        est_tokens: 0,
    }
}

fn random_key(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{}-{}",
        ADJECTIVES[rng.random_range(0..ADJECTIVES.len())],
        NOUNS[rng.random_range(0..NOUNS.len())]
    )
}

fn random_digits(rng: &mut ChaCha8Rng, len: u32) -> String {
    rng.random_range(10u64.pow(len - 1)..10u64.pow(len)).to_string()
}

fn needle(key: &str, value: &str) -> String {
    format!("The secret code for {key} is {value}.")
}

/// Single needle per instance. Instance `i` uses depth
/// `depth_fractions[i % D]` (repetition `i / D`).
pub fn gen_niah(p: &SyntheticParams) -> Result<Vec<TaskInstance>, SynthError> {
    expect_generator(p, GeneratorKind::Niah)?;
    if p.depth_fractions.is_empty() {
        return Err(SynthError::Precondition("depth_fractions must be nonempty".into()));
    }
    (0..p.instances)
        .map(|i| {
            let mut rng = instance_rng(p.generator, i, p.seed);
            let depth = p.depth_fractions[i as usize % p.depth_fractions.len()];
            let key = random_key(&mut rng);
            let value = random_digits(&mut rng, 7);
            let planted = needle(&key, &value);
            let hay = filler(&mut rng, p.context_tokens, planted.len() as u64 + 1)?;
            let slot = depth_slot(depth, hay.len());
            Ok(build(
                p.generator,
                weave(&hay, &[(slot, planted)]),
                format!("What is the secret code for {key}?"),
                vec![value],
                MetricKind::NeedleRecall,
            ))
        })
        .collect()
}

/// `needle_count` distinct needles at distinct depths; all values are asked for.
pub fn gen_multi_query_niah(p: &SyntheticParams) -> Result<Vec<TaskInstance>, SynthError> {
    expect_generator(p, GeneratorKind::MultiQueryNiah)?;
    if p.needle_count < 2 {
        return Err(SynthError::Precondition("multi_query_niah needs needle_count >= 2".into()));
    }
    let mut depths: Vec<f64> = Vec::new();
    for d in &p.depth_fractions {
        if !depths.contains(d) {
            depths.push(*d);
        }
    }
    if depths.len() < p.needle_count as usize {
        return Err(SynthError::DistinctDepths {
            needles: p.needle_count,
            distinct: depths.len(),
        });
    }
    let max_keys = ADJECTIVES.len() * NOUNS.len();
    if p.needle_count as usize > max_keys {
        return Err(SynthError::Precondition(format!(
            "needle_count may not exceed {max_keys}"
        )));
    }
    (0..p.instances)
        .map(|i| {
            let mut rng = instance_rng(p.generator, i, p.seed);
            let n = p.needle_count as usize;
            let mut keys = BTreeSet::new();
            let mut values = BTreeSet::new();
            let mut pairs = Vec::with_capacity(n);
            while pairs.len() < n {
                let k = random_key(&mut rng);
                let v = random_digits(&mut rng, 7);
                if keys.contains(&k) || values.contains(&v) {
                    continue;
                }
                keys.insert(k.clone());
                values.insert(v.clone());
                pairs.push((k, v));
            }
            let mut chosen: Vec<f64> = if depths.len() == n {
                depths.clone()
            } else {
                sample(&mut rng, depths.len(), n)
                    .into_iter()
                    .map(|j| depths[j])
                    .collect()
            };
            chosen.sort_by(f64::total_cmp);

            let sentences: Vec<String> = pairs.iter().map(|(k, v)| needle(k, v)).collect();
            let reserved: u64 = sentences.iter().map(|s| s.len() as u64 + 1).sum();
            let hay = filler(&mut rng, p.context_tokens, reserved)?;
            let slots = hay.len() + 1;
            if n > slots {
                return Err(SynthError::TooManyNeedles {
                    needles: p.needle_count,
                    slots,
                });
            }
            // distinct depths must land in distinct slots; collisions move forward
            let mut used = BTreeSet::new();
            let mut planted = Vec::with_capacity(n);
            for (d, s) in chosen.iter().zip(sentences) {
                let mut slot = depth_slot(*d, hay.len());
                while used.contains(&slot) {
                    slot = (slot + 1) % slots;
                }
                used.insert(slot);
                planted.push((slot, s));
            }
            let names: Vec<&str> = pairs.iter().map(|(k, _)| k.as_str()).collect();
            Ok(build(
                p.generator,
                weave(&hay, &planted),
                format!(
                    "What are the secret codes for {}? List all of them.",
                    names.join(", ")
                ),
                pairs.into_iter().map(|(_, v)| v).collect(),
                MetricKind::NeedleRecall,
            ))
        })
        .collect()
}

fn random_var(rng: &mut ChaCha8Rng) -> String {
    (0..5).map(|_| rng.random_range(b'A'..=b'Z') as char).collect()
}

/// Assignment chain `X1 = V, X2 = X1, ...`; the question asks for the last
/// variable's value.
pub fn gen_variable_tracking(p: &SyntheticParams) -> Result<Vec<TaskInstance>, SynthError> {
    expect_generator(p, GeneratorKind::VariableTracking)?;
    if p.chain_length < 1 {
        return Err(SynthError::Precondition("chain_length must be at least 1".into()));
    }
    (0..p.instances)
        .map(|i| {
            let mut rng = instance_rng(p.generator, i, p.seed);
            let mut names: Vec<String> = Vec::new();
            while names.len() < p.chain_length as usize {
                let v = random_var(&mut rng);
                if !names.contains(&v) {
                    names.push(v);
                }
            }
            let value = random_digits(&mut rng, 5);
            let sentences: Vec<String> = names
                .iter()
                .enumerate()
                .map(|(j, name)| match j {
                    0 => format!("VAR {name} = {value}."),
                    _ => format!("VAR {name} = VAR {}.", names[j - 1]),
                })
                .collect();
            let reserved: u64 = sentences.iter().map(|s| s.len() as u64 + 1).sum();
            let hay = filler(&mut rng, p.context_tokens, reserved)?;
            let mut slots: Vec<usize> = (0..sentences.len())
                .map(|_| rng.random_range(0..=hay.len()))
                .collect();
            slots.sort_unstable();
            let planted: Vec<(usize, String)> = slots.into_iter().zip(sentences).collect();
            let last = names.last().expect("chain_length >= 1");
            Ok(build(
                p.generator,
                weave(&hay, &planted),
                format!("Follow the VAR assignments in the text. What is the value of VAR {last}?"),
                vec![value],
                MetricKind::Contains,
            ))
        })
        .collect()
}

/// `needle_count` marker sentences with distinct numbers; gold is the list in
/// order of appearance.
pub fn gen_counting(p: &SyntheticParams) -> Result<Vec<TaskInstance>, SynthError> {
    expect_generator(p, GeneratorKind::Counting)?;
    if p.needle_count < 1 || p.needle_count > 999 {
        return Err(SynthError::Precondition("needle_count must lie in [1, 999]".into()));
    }
    (0..p.instances)
        .map(|i| {
            let mut rng = instance_rng(p.generator, i, p.seed);
            let numbers: Vec<u32> = sample(&mut rng, 999, p.needle_count as usize)
                .into_iter()
                .map(|j| j as u32 + 1)
                .collect();
            let sentences: Vec<String> = numbers
                .iter()
                .map(|n| format!("The little penguin counted {n} stars."))
                .collect();
            let reserved: u64 = sentences.iter().map(|s| s.len() as u64 + 1).sum();
            let hay = filler(&mut rng, p.context_tokens, reserved)?;
            let mut slots: Vec<usize> = (0..sentences.len())
                .map(|_| rng.random_range(0..=hay.len()))
                .collect();
            slots.sort_unstable();
            let planted: Vec<(usize, String)> = slots.into_iter().zip(sentences).collect();
            let gold = numbers
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            Ok(build(
                p.generator,
                weave(&hay, &planted),
                "How many stars did the little penguin count each time? \
                 List every number in order of appearance, separated by spaces."
                    .to_string(),
                vec![gold],
                MetricKind::TokenF1,
            ))
        })
        .collect()
}
