//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and time budgets are pinned below.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{config, pipeline, runtime, scripted_partial, GateBackend};
use lceval_core::domain::CapabilityTaxonomy;
use lceval_core::eval::{pass_at_k, rouge_l, token_prf};
use lceval_core::gateway::{ScriptEntry, ScriptedBackend};
use lceval_core::ingest::TemplateRegistry;
use lceval_core::pipeline::PipelineError;
use lceval_core::rag::{build_index, chunk_text, self_route, Chunk};
use lceval_core::report::{flat_mean, overall_score};
use lceval_core::scheduler::{balance_report, plan_lpt};
use lceval_core::{
    AugmentationConfig, BackendConfig, CostModel, NormalizationRule, RagStrategy, RetryPolicy,
    Route, TaskInstance,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AVG_TOLERANCE: f64 = 0.005;
const BM25_SCORE_TOLERANCE: f64 = 1e-9;
const PASS_AT_K_TOLERANCE: f64 = 0.01;
const MONTE_CARLO_DRAWS: usize = 100_000;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion(name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|_| Err("panicked".to_string()));
    let took = start.elapsed();
    let outcome = outcome.and_then(|detail| {
        if took <= budget {
            Ok(detail)
        } else {
            Err(format!("{detail}; took {took:.2?}, budget {budget:?}"))
        }
    });
    match &outcome {
        Ok(detail) => println!("PASS {name} ({took:.2?}): {detail}"),
        Err(detail) => println!("FAIL {name} ({took:.2?}): {detail}"),
    }
    outcome.is_ok()
}

fn reference_aggregation() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/reference_leaderboard.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(|e| e.to_string())?;
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    let tax = CapabilityTaxonomy::default();
    let mut rows = 0;
    let mut worst: f64 = 0.0;
    let mut printed = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let model = rec[0].to_string();
        let avg: f64 = rec[1].parse().unwrap();
        let scores: BTreeMap<String, f64> = header[2..]
            .iter()
            .zip(rec.iter().skip(2))
            .map(|(h, v)| (h.clone(), v.parse().unwrap()))
            .collect();
        ensure(scores.len() == 12, || format!("{model}: {} scores", scores.len()))?;
        let mean = flat_mean(&scores, &tax).map_err(|e| e.to_string())?;
        worst = worst.max((mean - avg).abs());
        ensure((mean - avg).abs() <= AVG_TOLERANCE + 1e-9, || {
            format!("{model}: mean {mean} vs printed {avg}")
        })?;
        let overall = overall_score(&scores, &tax).map_err(|e| e.to_string())?;
        printed.insert(model, overall);
        rows += 1;
    }
    ensure(rows == 14, || format!("{rows} rows"))?;
    for (model, want) in [("Qwen3-14B", 51.54), ("Llama-3.1-8B-Instruct", 46.94)] {
        let got = printed.get(model).copied();
        ensure(got == Some(want), || format!("{model}: {got:?} != {want}"))?;
    }
    Ok(format!("14 rows, max |mean - avg| = {worst:.5}; 51.54 and 46.94 exact"))
}

const WORDS: [&str; 10] = ["The", "cat", "a", "dog,", "ran", "An", "fast.", "cat!", "blue", "sky"];

fn random_text(rng: &mut ChaCha8Rng, max: usize) -> String {
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn oracle_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.chars()
                .filter(|c| !c.is_ascii_punctuation())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty() && !["a", "an", "the"].contains(&t.as_str()))
        .collect()
}

/// Suffix-table LCS, filled from the end.
fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            t[i][j] = if a[i] == b[j] {
                1 + t[i + 1][j + 1]
            } else {
                t[i + 1][j].max(t[i][j + 1])
            };
        }
    }
    t[0][0]
}

fn oracle_prf(overlap: usize, p: usize, g: usize) -> (f64, f64, f64) {
    if p == 0 && g == 0 {
        return (1.0, 1.0, 1.0);
    }
    if p == 0 || g == 0 || overlap == 0 {
        return (0.0, 0.0, 0.0);
    }
    let pr = overlap as f64 / p as f64;
    let re = overlap as f64 / g as f64;
    (pr, re, 2.0 * pr * re / (pr + re))
}

fn oracle_multiset_overlap(a: &[String], b: &[String]) -> usize {
    let mut ca: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cb: BTreeMap<&str, usize> = BTreeMap::new();
    a.iter().for_each(|t| *ca.entry(t).or_default() += 1);
    b.iter().for_each(|t| *cb.entry(t).or_default() += 1);
    ca.iter().map(|(t, n)| (*n).min(cb.get(t).copied().unwrap_or(0))).sum()
}

fn metric_oracles() -> Outcome {
    let rules = NormalizationRule::ALL;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..1000 {
        let (x, y) = (random_text(&mut rng, 25), random_text(&mut rng, 25));
        let (tx, ty) = (oracle_tokens(&x), oracle_tokens(&y));

        let r = rouge_l(&x, &y, &rules);
        let want = oracle_prf(oracle_lcs(&tx, &ty), tx.len(), ty.len());
        ensure((r.precision, r.recall, r.f1) == want, || {
            format!("rouge_l case {case}: {r:?} vs {want:?} for {x:?} / {y:?}")
        })?;

        let t = token_prf(&x, &y, &rules);
        let want = oracle_prf(oracle_multiset_overlap(&tx, &ty), tx.len(), ty.len());
        ensure((t.precision, t.recall, t.f1) == want, || {
            format!("token_prf case {case}: {t:?} vs {want:?}")
        })?;
    }

    let closed = pass_at_k(4, 2, 2).map_err(|e| e.to_string())?;
    ensure((closed - 5.0 / 6.0).abs() < 1e-12, || format!("pass@2(4,2) = {closed}"))?;
    ensure(pass_at_k(5, 0, 3) == Ok(0.0), || "c=0 must give 0".into())?;
    ensure(pass_at_k(5, 3, 3) == Ok(1.0), || "n-c<k must give 1".into())?;

    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=20usize);
        let c = rng.random_range(0..=n);
        let k = rng.random_range(1..=n);
        let hits = (0..MONTE_CARLO_DRAWS)
            .filter(|_| sample(&mut rng, n, k).iter().any(|i| i < c))
            .count();
        let mc = hits as f64 / MONTE_CARLO_DRAWS as f64;
        let exact = pass_at_k(n as u64, c as u64, k as u64).map_err(|e| e.to_string())?;
        worst = worst.max((mc - exact).abs());
        ensure((mc - exact).abs() <= PASS_AT_K_TOLERANCE, || {
            format!("pass@{k}(n={n}, c={c}): {exact} vs Monte Carlo {mc}")
        })?;
    }
    Ok(format!(
        "1000 rouge_l/token_prf pairs exact; pass@k max Monte Carlo gap {worst:.4} over 50 triples"
    ))
}

const VOCAB: [&str; 12] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima",
];

fn brute_bm25(docs: &[Vec<&str>], query: &[&str], k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let terms: BTreeSet<&str> = query.iter().copied().collect();
    docs.iter()
        .map(|d| {
            if avg == 0.0 {
                return 0.0;
            }
            let mut s = 0.0;
            for t in &terms {
                let tf = d.iter().filter(|w| *w == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln().max(0.0);
                s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * d.len() as f64 / avg));
            }
            s
        })
        .collect()
}

fn bm25_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(1..=100usize);
        let docs: Vec<Vec<&str>> = (0..n)
            .map(|_| {
                let len = rng.random_range(0..=15);
                (0..len).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect()
            })
            .collect();
        let chunks: Vec<Chunk> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| Chunk {
                chunk_index: i,
                text: d.join(" "),
                est_tokens: d.len() as u64,
                span: (0, 0),
            })
            .collect();
        let qlen = rng.random_range(1..=5);
        let query: Vec<&str> = (0..qlen).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect();
        let qtext = query.join(" ");
        let k = rng.random_range(1..=n);

        let index = build_index(&chunks).map_err(|e| e.to_string())?;
        let brute = brute_bm25(&docs, &query, 1.5, 0.75);
        for (i, want) in brute.iter().enumerate() {
            let got = index.score(&qtext, i);
            worst = worst.max((got - want).abs());
            ensure((got - want).abs() <= BM25_SCORE_TOLERANCE, || {
                format!("case {case} chunk {i}: {got} vs {want}")
            })?;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| brute[b].total_cmp(&brute[a]).then(a.cmp(&b)));
        let mut want: Vec<usize> = order[..k].to_vec();
        want.sort_unstable();
        let got = index.retrieve_topk(&qtext, k);
        ensure(got == want, || format!("case {case}: top-{k} {got:?} vs {want:?}"))?;
    }

    let p = pipeline(Path::new("/nonexistent"));
    let rt = runtime();
    let mut needles = 0;
    for seed in [1, 2] {
        let mut cfg = config("bm25", BackendConfig::echo("e"), &["NIAH"], 1);
        cfg.seed = seed;
        for inst in rt.block_on(p.instances(&cfg, "NIAH")).map_err(|e| e.to_string())? {
            let chunks = chunk_text(&inst.context, 256, &CostModel::default());
            let index = build_index(&chunks).map_err(|e| e.to_string())?;
            let top = index.retrieve_topk(&inst.question, 1);
            let hit = top
                .first()
                .is_some_and(|&i| chunks[i].text.contains(&inst.gold[0]));
            ensure(hit, || format!("needle missed for {} ({} chunks)", inst.instance_id, chunks.len()))?;
            needles += 1;
        }
    }
    ensure(needles == 100, || format!("{needles} NIAH cases"))?;
    Ok(format!("1000 corpora, max score gap {worst:.2e}; needle top-1 in 100/100"))
}

fn exhaustive_makespan(costs: &[u64], m: usize) -> u64 {
    fn go(costs: &[u64], loads: &mut Vec<u64>, best: &mut u64) {
        let Some((&c, rest)) = costs.split_first() else {
            *best = (*best).min(*loads.iter().max().unwrap());
            return;
        };
        for w in 0..loads.len() {
            loads[w] += c;
            if loads[w] < *best {
                go(rest, loads, best);
            }
            loads[w] -= c;
        }
    }
    let mut best = u64::MAX;
    go(costs, &mut vec![0; m], &mut best);
    best
}

fn scheduler_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..10_000 {
        let n = rng.random_range(0..=40usize);
        let m = rng.random_range(1..=8usize);
        let items: Vec<(String, u64)> = (0..n)
            .map(|i| (format!("x{i}"), rng.random_range(0..=500)))
            .collect();
        let a = plan_lpt(&items, m);
        let mut ids: Vec<&String> = a.worker_loads.iter().flatten().collect();
        ids.sort();
        ids.dedup();
        ensure(ids.len() == n && a.worker_loads.iter().map(Vec::len).sum::<usize>() == n, || {
            format!("case {case}: not a partition")
        })?;
        let cost: HashMap<&str, u64> = items.iter().map(|(i, c)| (i.as_str(), *c)).collect();
        for (lane, total) in a.worker_loads.iter().zip(&a.load_totals) {
            let sum: u64 = lane.iter().map(|i| cost[i.as_str()]).sum();
            ensure(sum == *total, || format!("case {case}: load total mismatch"))?;
        }
        let max_cost = items.iter().map(|x| x.1).max().unwrap_or(0);
        let spread = balance_report(&a).spread;
        ensure(spread <= max_cost, || format!("case {case}: spread {spread} > max cost {max_cost}"))?;
    }

    let mut checked = 0;
    for case in 0..600 {
        let n = rng.random_range(1..=10usize);
        let m = rng.random_range(1..=3usize);
        let costs: Vec<u64> = (0..n).map(|_| rng.random_range(1..=30)).collect();
        let items: Vec<(String, u64)> = costs.iter().enumerate().map(|(i, c)| (format!("y{i}"), *c)).collect();
        let lpt = balance_report(&plan_lpt(&items, m)).max_load;
        let opt = exhaustive_makespan(&costs, m);
        let (lhs, rhs) = (3 * m as u64 * lpt, (4 * m as u64 - 1) * opt);
        ensure(lhs <= rhs, || format!("case {case}: LPT {lpt} vs OPT {opt} on {costs:?}, m={m}"))?;
        checked += 1;
    }

    let worked: Vec<(String, u64)> = [5, 4, 3, 3, 2, 1]
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("w{i}"), *c))
        .collect();
    let a = plan_lpt(&worked, 2);
    ensure(a.load_totals == vec![9, 9], || format!("worked example {:?}", a.load_totals))?;
    Ok(format!("10000 partitions; LPT bound held on {checked} exhaustive cases; worked example (9, 9)"))
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = pipeline(dir.path());
    let rt = runtime();
    let mut got = Vec::new();
    for (tag, acc) in [("acc100", 1.0), ("acc0", 0.0)] {
        let cfg = config(tag, BackendConfig::mock_oracle("mock", acc), &["NIAH"], 4);
        let out = rt.block_on(p.run(&cfg, None)).map_err(|e| e.to_string())?;
        let report = out.report.ok_or("no report")?;
        ensure(report.benchmarks[0].instance_count == 50, || "expected 50 instances".into())?;
        got.push(report.report.overall);
    }
    let cfg = config("half", BackendConfig::echo("scripted"), &["NIAH"], 4);
    let instances = rt.block_on(p.instances(&cfg, "NIAH")).map_err(|e| e.to_string())?;
    let tokens: Vec<u64> = instances.iter().map(|i| i.est_tokens).collect();
    let (lo, hi) = (*tokens.iter().min().unwrap(), *tokens.iter().max().unwrap());
    ensure((7_500..=8_500).contains(&lo) && (7_500..=8_500).contains(&hi), || {
        format!("context sizes {lo}..{hi} not ~8K")
    })?;
    let backend = Arc::new(scripted_partial(&instances, 25));
    let out = rt
        .block_on(p.run_with_backend(&cfg, backend, None, None))
        .map_err(|e| e.to_string())?;
    got.push(out.report.ok_or("no report")?.report.overall);
    ensure(got == vec![100.0, 0.0, 50.0], || format!("scores {got:?}"))?;

    let other = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = config("acc100", BackendConfig::mock_oracle("mock", 1.0), &["NIAH"], 4);
    rt.block_on(pipeline(other.path()).run(&cfg, None)).map_err(|e| e.to_string())?;
    let a = std::fs::read(dir.path().join("acc100/report.json")).map_err(|e| e.to_string())?;
    let b = std::fs::read(other.path().join("acc100/report.json")).map_err(|e| e.to_string())?;
    ensure(a == b, || "report.json differs between runs".into())?;
    Ok(format!("NIAH {lo}..{hi} tokens; scores 100.00 / 0.00 / 50.00; report.json byte-identical"))
}

fn resume_accounting() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = Arc::new(pipeline(dir.path()));
    let rt = runtime();
    let cfg = config("resume", BackendConfig::echo("gate"), &["NIAH"], 1);

    let gate = GateBackend::new(Some(20));
    let task = {
        let (p, cfg, gate) = (p.clone(), cfg.clone(), gate.clone());
        rt.spawn(async move { p.run_with_backend(&cfg, gate, None, None).await })
    };
    let deadline = Instant::now() + Duration::from_secs(60);
    while gate.count() < 21 {
        ensure(Instant::now() < deadline, || "run never reached 20 predictions".into())?;
        std::thread::sleep(Duration::from_millis(5));
    }
    task.abort();
    let aborted = rt.block_on(task);
    ensure(aborted.is_err_and(|e| e.is_cancelled()), || "run was not killed".into())?;
    let lines = std::fs::read_to_string(dir.path().join("resume/predictions/NIAH.jsonl"))
        .map_err(|e| e.to_string())?
        .lines()
        .count();
    ensure(lines == 20, || format!("{lines} predictions persisted before the kill"))?;

    let counter = GateBackend::new(None);
    let out = rt
        .block_on(p.run_with_backend(&cfg, counter.clone(), None, None))
        .map_err(|e| e.to_string())?;
    ensure(counter.count() == 30, || format!("resume issued {} calls", counter.count()))?;
    ensure(out.report.is_some_and(|r| r.report.overall == 100.0), || "resumed run incomplete".into())?;

    let mut changed = cfg.clone();
    changed.seed += 1;
    changed.worker_count = 2;
    match rt.block_on(p.run_with_backend(&changed, GateBackend::new(None), None, None)) {
        Err(PipelineError::ResumeRefused(fields)) => {
            let joined = fields.join("; ");
            ensure(joined.contains("seed") && joined.contains("worker_count"), || {
                format!("diff does not name both fields: {joined}")
            })?;
            Ok(format!("killed at 20/50, resume sent 30 calls; refusal diff: {joined}"))
        }
        other => Err(format!("perturbed config was not refused: {other:?}")),
    }
}

fn self_route_contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rt = runtime();
    let mut cfg = config("sr", BackendConfig::echo("e"), &["NIAH"], 1);
    cfg.limit = Some(10);
    let instances: Vec<TaskInstance> = rt
        .block_on(pipeline(dir.path()).instances(&cfg, "NIAH"))
        .map_err(|e| e.to_string())?;
    let templates = TemplateRegistry::default();
    let template = templates.get("default").map_err(|e| e.to_string())?;
    let aug = AugmentationConfig::new(RagStrategy::SelfRoute);
    for inst in &instances {
        for (outputs, calls, route) in [
            (vec![inst.gold[0].clone()], 1, Route::Retrieved),
            (vec!["UNANSWERABLE".to_string(), inst.gold[0].clone()], 2, Route::FullContext),
        ] {
            let backend = ScriptedBackend::new(
                "scripted",
                outputs.into_iter().map(|output| ScriptEntry {
                    instance_id: inst.instance_id.clone(),
                    output,
                    delay_ms: None,
                }),
            );
            let (pred, got) = rt
                .block_on(self_route(inst, template, &backend, &RetryPolicy::default(), &aug, &CostModel::default()))
                .map_err(|e| e.to_string())?;
            ensure(backend.call_count() == calls, || {
                format!("{:?}: {} calls, want {calls}", route, backend.call_count())
            })?;
            ensure(got == route && pred.route == Some(route), || format!("route {got:?}, want {route:?}"))?;
            ensure(pred.output_text == inst.gold[0], || "final answer is not the last pass".into())?;
        }
    }
    Ok(format!("{} instances: 1 call -> retrieved, 2 calls -> full_context", instances.len()))
}

fn main() {
    let results = [
        criterion("reference-aggregation", Duration::from_secs(1), reference_aggregation),
        criterion("metric-oracles", Duration::from_secs(30), metric_oracles),
        criterion("bm25-oracle", Duration::from_secs(30), bm25_oracle),
        criterion("scheduler", Duration::from_secs(60), scheduler_suite),
        criterion("end-to-end-determinism", Duration::from_secs(120), end_to_end),
        criterion("resume-accounting", Duration::from_secs(60), resume_accounting),
        criterion("self-route-contract", Duration::from_secs(30), self_route_contract),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
