//! Retrieval augmentation: sentence chunking, BM25 retrieval, context
//! reassembly and two-pass self-routing.

mod bm25;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AugmentationConfig, CostModel, Prediction, Route, TaskInstance};
use crate::gateway::{complete, Backend, RetryPolicy};
use crate::ingest::{apply_template, PromptTemplate, TemplateError};

pub use bm25::{
    build_index, build_index_with, retrieve_topk, score_bm25, tokenize, Bm25Index, DEFAULT_B,
    DEFAULT_K1,
};

/// Exact, case-sensitive reply that sends self-routing to the full context.
pub const UNANSWERABLE: &str = "UNANSWERABLE";

const SELF_ROUTE_INSTRUCTION: &str = "Answer using only the text below. If the text does not contain \
enough information to answer, reply with exactly UNANSWERABLE.";

#[derive(Debug, Error, PartialEq)]
pub enum RagError {
    #[error("cannot index an empty chunk list")]
    EmptyCorpus,
    #[error("chunks must be in document order (index {prev} followed by {next})")]
    OutOfOrder { prev: usize, next: usize },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_index: usize,
    pub text: String,
    pub est_tokens: u64,
    /// Byte offsets `[start, end)` in the source.
    pub span: (usize, usize),
}

/// Byte ranges of sentences; trailing whitespace stays with its sentence so
/// the ranges tile the text.
fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let at_break = matches!(c, '.' | '!' | '?' | '\n');
        if !at_break {
            continue;
        }
        let mut end = i + c.len_utf8();
        let mut saw_space = c == '\n';
        while let Some(&(j, w)) = chars.peek() {
            if !w.is_whitespace() {
                break;
            }
            saw_space = true;
            end = j + w.len_utf8();
            chars.next();
        }
        if saw_space {
            spans.push((start, end));
            start = end;
        }
    }
    if start < text.len() {
        spans.push((start, text.len()));
    }
    spans
}

/// Greedily packs whole sentences into chunks of at most `chunk_tokens`
/// (a longer sentence becomes its own chunk). Chunks tile the text exactly.
pub fn chunk_text(text: &str, chunk_tokens: u64, model: &CostModel) -> Vec<Chunk> {
    let chunk_tokens = chunk_tokens.max(1);
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut cur: Option<(usize, usize)> = None;
    let push = |chunks: &mut Vec<Chunk>, (s, e): (usize, usize)| {
        let t = &text[s..e];
        chunks.push(Chunk {
            chunk_index: chunks.len(),
            text: t.to_string(),
            est_tokens: model.estimate(t),
            span: (s, e),
        });
    };
    for (s, e) in sentence_spans(text) {
        cur = match cur {
            None => Some((s, e)),
            Some((cs, _)) if model.estimate(&text[cs..e]) <= chunk_tokens => Some((cs, e)),
            Some(done) => {
                push(&mut chunks, done);
                Some((s, e))
            }
        };
    }
    if let Some(done) = cur {
        push(&mut chunks, done);
    }
    chunks
}

/// Joins chunks with `separator`; chunks must be in strictly increasing
/// document order.
pub fn assemble_context(chunks: &[&Chunk], separator: &str) -> Result<String, RagError> {
    for w in chunks.windows(2) {
        if w[0].chunk_index >= w[1].chunk_index {
            return Err(RagError::OutOfOrder {
                prev: w[0].chunk_index,
                next: w[1].chunk_index,
            });
        }
    }
    Ok(chunks
        .iter()
        .map(|c| c.text.as_str())
        .collect::<Vec<_>>()
        .join(separator))
}

/// Context reduced to the `top_k` BM25 chunks for the instance question.
pub fn retrieve_context(inst: &TaskInstance, aug: &AugmentationConfig, model: &CostModel) -> String {
    let chunks = chunk_text(&inst.context, aug.chunk_tokens, model);
    let Ok(index) = build_index(&chunks) else {
        return inst.context.clone();
    };
    let picked: Vec<&Chunk> = index
        .retrieve_topk(&inst.question, aug.top_k.max(1) as usize)
        .into_iter()
        .map(|i| &chunks[i])
        .collect();
    assemble_context(&picked, &aug.separator).expect("top-k indices are sorted")
}

/// The instance with its context replaced by retrieved chunks.
pub fn retrieved_instance(inst: &TaskInstance, aug: &AugmentationConfig, model: &CostModel) -> TaskInstance {
    TaskInstance {
        context: retrieve_context(inst, aug, model),
        ..inst.clone()
    }
}

/// Single pass over retrieved context.
pub async fn bm25_complete(
    inst: &TaskInstance,
    template: &PromptTemplate,
    backend: &dyn Backend,
    policy: &RetryPolicy,
    aug: &AugmentationConfig,
    model: &CostModel,
) -> Result<Prediction, RagError> {
    let reduced = retrieved_instance(inst, aug, model);
    let prompt = apply_template(template, &reduced)?;
    let mut p = complete(backend, template.system_preamble.as_deref(), &prompt, inst, policy).await;
    p.route = Some(Route::Retrieved);
    Ok(p)
}

/// Pass 1 over retrieved context with an UNANSWERABLE escape; pass 2 over the
/// full context only when pass 1 contains the sentinel. A failed pass 1 is
/// returned as is.
pub async fn self_route(
    inst: &TaskInstance,
    template: &PromptTemplate,
    backend: &dyn Backend,
    policy: &RetryPolicy,
    aug: &AugmentationConfig,
    model: &CostModel,
) -> Result<(Prediction, Route), RagError> {
    let system = template.system_preamble.as_deref();
    let reduced = retrieved_instance(inst, aug, model);
    let first_prompt = format!(
        "{SELF_ROUTE_INSTRUCTION}\n\n{}",
        apply_template(template, &reduced)?
    );
    let mut first = complete(backend, system, &first_prompt, inst, policy).await;
    if first.is_failure() || !first.output_text.contains(UNANSWERABLE) {
        first.route = Some(Route::Retrieved);
        return Ok((first, Route::Retrieved));
    }
    let full_prompt = apply_template(template, inst)?;
    let mut second = complete(backend, system, &full_prompt, inst, policy).await;
    second.latency_ms += first.latency_ms;
    second.route = Some(Route::FullContext);
    Ok((second, Route::FullContext))
}

#[cfg(test)]
mod tests;
