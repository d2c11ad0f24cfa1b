use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::domain::{GeneratorKind, GeneratorParams, MetricKind, MetricSpec, RagStrategy, SyntheticParams};
use crate::gateway::{ScriptEntry, ScriptedBackend};
use crate::ingest::{synth, TemplateRegistry};

fn chunks_of(texts: &[&str]) -> Vec<Chunk> {
    let mut offset = 0;
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let c = Chunk {
                chunk_index: i,
                text: t.to_string(),
                est_tokens: 0,
                span: (offset, offset + t.len()),
            };
            offset += t.len();
            c
        })
        .collect()
}

#[test]
fn ten_one_token_sentences_pack_four_four_two() {
    let text = "ab. ".repeat(9) + "ab.";
    let chunks = chunk_text(&text, 4, &CostModel::default());
    let sizes: Vec<u64> = chunks.iter().map(|c| c.est_tokens).collect();
    assert_eq!(sizes, vec![4, 4, 2]);
    assert_eq!(chunks.iter().map(|c| c.text.as_str()).collect::<String>(), text);
}

#[test]
fn large_budget_gives_one_chunk_and_empty_gives_none() {
    let text = "One sentence. Another one! A third?";
    let chunks = chunk_text(text, 1_000, &CostModel::default());
    assert_eq!(chunks.len(), 1);
    assert_eq!(chunks[0].text, text);
    assert_eq!(chunks[0].span, (0, text.len()));
    assert!(chunk_text("", 4, &CostModel::default()).is_empty());
}

#[test]
fn overlong_sentence_is_its_own_chunk() {
    let text = "Hi. This sentence is far longer than the budget allows. Ok.";
    let chunks = chunk_text(text, 3, &CostModel::default());
    assert_eq!(chunks.len(), 3);
    assert!(chunks[1].text.starts_with("This sentence"));
}

#[test]
fn index_statistics() {
    let idx = build_index(&chunks_of(&["x y", "y", "z"])).unwrap();
    assert_eq!(idx.doc_count, 3);
    assert_eq!(idx.df("x"), 1);
    assert_eq!(idx.avg_doc_len, 4.0 / 3.0);
    assert!((idx.idf("x") - (8.0f64 / 3.0).ln()).abs() < 1e-12);
    assert!((idx.idf("x") - 0.9808).abs() < 5e-5);
    assert_eq!(build_index(&[]).unwrap_err(), RagError::EmptyCorpus);
}

#[test]
fn tokenization_lowercases_and_strips_punctuation() {
    assert_eq!(tokenize("Hello, World! amber-falcon"), vec!["hello", "world", "amber", "falcon"]);
}

#[test]
fn scoring_rules() {
    let idx = build_index(&chunks_of(&["alpha beta", "beta gamma", "gamma delta"])).unwrap();
    for i in 0..3 {
        assert_eq!(idx.score("omega", i), 0.0);
    }
    let top = idx.retrieve_topk("alpha", 1);
    assert_eq!(top, vec![0]);
    assert!(idx.score("alpha", 0) > idx.score("alpha", 1));
    assert_eq!(idx.retrieve_topk("anything", 10), vec![0, 1, 2]);
}

#[test]
fn ties_go_to_lower_index_and_output_is_document_order() {
    let idx = build_index(&chunks_of(&["a", "k", "k", "b k"])).unwrap();
    assert_eq!(idx.score("k", 1), idx.score("k", 2));
    assert_eq!(idx.retrieve_topk("k", 1), vec![1]);
    assert_eq!(idx.retrieve_topk("k b", 2), vec![1, 3]);
}

#[test]
fn assembly_joins_in_order_and_rejects_shuffles() {
    let c = chunks_of(&["a", "b", "c"]);
    assert_eq!(assemble_context(&[&c[0]], "\n").unwrap(), "a");
    assert_eq!(assemble_context(&[&c[0], &c[1]], "\n").unwrap(), "a\nb");
    assert_eq!(
        assemble_context(&[&c[2], &c[0]], "\n"),
        Err(RagError::OutOfOrder { prev: 2, next: 0 })
    );
}

fn niah_instances(n: u32) -> Vec<TaskInstance> {
    let g = GeneratorParams {
        context_tokens: 2_000,
        instances: n,
        ..GeneratorParams::default()
    };
    synth::gen_niah(&SyntheticParams::new(GeneratorKind::Niah, &g)).unwrap()
}

#[test]
fn needle_chunk_ranks_first() {
    for inst in niah_instances(20) {
        let chunks = chunk_text(&inst.context, 100, &CostModel::default());
        let idx = build_index(&chunks).unwrap();
        let top = idx.retrieve_topk(&inst.question, 1);
        assert!(chunks[top[0]].text.contains(&inst.gold[0]));
    }
}

fn inst(id: &str, context: &str) -> TaskInstance {
    TaskInstance {
        instance_id: id.into(),
        benchmark_id: "b".into(),
        task_id: "t".into(),
        context: context.into(),
        question: "What is the code?".into(),
        gold: vec!["42".into()],
        choices: None,
        metric: MetricSpec::new(MetricKind::Contains),
        est_tokens: 0,
    }
}

fn scripted(outputs: &[&str]) -> Arc<ScriptedBackend> {
    Arc::new(ScriptedBackend::new(
        "s",
        outputs.iter().map(|o| ScriptEntry {
            instance_id: "i".into(),
            output: o.to_string(),
            delay_ms: None,
        }),
    ))
}

fn run_self_route(backend: &ScriptedBackend, aug: &AugmentationConfig) -> (Prediction, Route) {
    let reg = TemplateRegistry::default();
    let t = reg.get("default").unwrap();
    let context = "Filler one. Filler two. The code is 42. Filler three.";
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .unwrap()
        .block_on(self_route(
            &inst("i", context),
            t,
            backend,
            &RetryPolicy::default(),
            aug,
            &CostModel::default(),
        ))
        .unwrap()
}

#[test]
fn self_route_answers_on_first_pass() {
    let b = scripted(&["42"]);
    let aug = AugmentationConfig {
        chunk_tokens: 4,
        top_k: 1,
        ..AugmentationConfig::new(RagStrategy::SelfRoute)
    };
    let (p, route) = run_self_route(&b, &aug);
    assert_eq!(route, Route::Retrieved);
    assert_eq!(p.output_text, "42");
    assert_eq!(b.call_count(), 1);
}

#[test]
fn self_route_falls_back_on_sentinel() {
    let b = scripted(&["UNANSWERABLE", "42"]);
    let aug = AugmentationConfig {
        chunk_tokens: 4,
        top_k: 1,
        ..AugmentationConfig::new(RagStrategy::SelfRoute)
    };
    let (p, route) = run_self_route(&b, &aug);
    assert_eq!(route, Route::FullContext);
    assert_eq!(p.route, Some(Route::FullContext));
    assert_eq!(p.output_text, "42");
    assert_eq!(b.call_count(), 2);
}

#[test]
fn full_coverage_retrieval_equals_full_context() {
    let i = inst("i", "Filler one. Filler two. The code is 42.");
    let aug = AugmentationConfig {
        chunk_tokens: 4,
        top_k: 100,
        separator: String::new(),
        ..AugmentationConfig::new(RagStrategy::SelfRoute)
    };
    assert_eq!(retrieve_context(&i, &aug, &CostModel::default()), i.context);
    let b = scripted(&["42"]);
    assert_eq!(run_self_route(&b, &aug).1, Route::Retrieved);
}

proptest! {
    #[test]
    fn chunks_tile_the_source(text in "[a-z .!?\n]{0,200}", budget in 1u64..20) {
        let chunks = chunk_text(&text, budget, &CostModel::default());
        prop_assert_eq!(chunks.iter().map(|c| c.text.as_str()).collect::<String>(), text.clone());
        let mut pos = 0;
        for (i, c) in chunks.iter().enumerate() {
            prop_assert_eq!(c.chunk_index, i);
            prop_assert_eq!(c.span.0, pos);
            pos = c.span.1;
        }
        prop_assert_eq!(pos, text.len());
    }

    #[test]
    fn scores_are_nonnegative(docs in prop::collection::vec("[a-d ]{0,12}", 1..8), q in "[a-e ]{0,8}") {
        let texts: Vec<&str> = docs.iter().map(String::as_str).collect();
        let idx = build_index(&chunks_of(&texts)).unwrap();
        for (i, text) in texts.iter().enumerate() {
            let s = idx.score(&q, i);
            prop_assert!(s >= 0.0);
            let shares = tokenize(&q).iter().any(|t| tokenize(text).contains(t));
            if !shares {
                prop_assert_eq!(s, 0.0);
            }
        }
    }
}
