//! Scoring predictions against gold answers.

mod judge;
mod metrics;
mod normalize;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MetricKind, MetricSpec, Prediction, TaskInstance};
use crate::gateway::{Backend, RetryPolicy};

pub use judge::{builtin_rubric, llm_judge, parse_verdict, render_rubric, DEFAULT_RUBRIC};
pub use metrics::{
    choice_extract, citation_prf, contains_match, exact_match, extract_citations, lcs_len,
    needle_recall, pass_at_k, rouge_l, token_prf, Prf,
};
pub use normalize::{normalize_answer, normalized_tokens};

/// Detail recorded on results for predictions whose request failed.
pub const BACKEND_FAILURE: &str = "backend_failure";
/// Detail prefix for judge metrics whose verdict could not be obtained.
pub const JUDGE_FAILURE: &str = "judge_failure";

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unknown metric kind '{0}'")]
    UnknownMetric(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("judge metric requires a configured judge backend")]
    JudgeRequired,
    #[error("judge failed: {0}")]
    JudgeFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub instance_id: String,
    pub metric_kind: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Components>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl MetricResult {
    /// True for results that stand in for a failed request or verdict.
    pub fn is_failure(&self) -> bool {
        self.detail
            .as_deref()
            .is_some_and(|d| d == BACKEND_FAILURE || d.starts_with(JUDGE_FAILURE))
    }
}

fn produces_prf(kind: &MetricKind) -> bool {
    matches!(
        kind,
        MetricKind::TokenF1 | MetricKind::RougeL | MetricKind::CitationPrf
    )
}

fn result(inst: &TaskInstance, spec: &MetricSpec, score: f64) -> MetricResult {
    MetricResult {
        instance_id: inst.instance_id.clone(),
        metric_kind: spec.kind.to_string(),
        score,
        components: None,
        detail: None,
    }
}

fn with_prf(mut r: MetricResult, prf: Prf) -> MetricResult {
    r.score = prf.f1;
    r.components = Some(Components {
        precision: prf.precision,
        recall: prf.recall,
    });
    r
}

/// Best P/R/F over alternative references, by F1 (first wins ties).
fn best_prf(gold: &[String], f: impl Fn(&str) -> Prf) -> Prf {
    gold.iter()
        .map(|g| f(g))
        .fold(None::<Prf>, |best, cur| match best {
            Some(b) if b.f1 >= cur.f1 => Some(b),
            _ => Some(cur),
        })
        .unwrap_or(Prf::ZERO)
}

/// Scores one prediction with any non-judge metric. Judge metrics need a
/// backend and go through [`Evaluator`].
pub fn score_instance(
    inst: &TaskInstance,
    pred: &Prediction,
    spec: &MetricSpec,
) -> Result<MetricResult, EvalError> {
    let rules = &spec.normalization;
    match &spec.kind {
        MetricKind::Unknown(name) => return Err(EvalError::UnknownMetric(name.clone())),
        MetricKind::Judge if !pred.is_failure() => return Err(EvalError::JudgeRequired),
        _ => {}
    }
    if pred.is_failure() {
        let mut r = result(inst, spec, 0.0);
        if produces_prf(&spec.kind) {
            r.components = Some(Components {
                precision: 0.0,
                recall: 0.0,
            });
        }
        r.detail = Some(BACKEND_FAILURE.to_string());
        return Ok(r);
    }
    let out = &pred.output_text;
    let r = match &spec.kind {
        MetricKind::Exact => result(inst, spec, exact_match(out, &inst.gold, rules)),
        MetricKind::Contains => result(inst, spec, contains_match(out, &inst.gold, rules)),
        MetricKind::Choice => {
            let labels: Vec<String> = match &inst.choices {
                Some(c) if !c.is_empty() => c.iter().map(|(l, _)| l.clone()).collect(),
                _ => ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect(),
            };
            let picked = choice_extract(out, &labels);
            let score = picked
                .as_deref()
                .map_or(0.0, |l| exact_match(l, &inst.gold, rules));
            let mut r = result(inst, spec, score);
            r.detail = Some(match picked {
                Some(l) => format!("extracted {l}"),
                None => "no_label".to_string(),
            });
            r
        }
        MetricKind::TokenF1 => with_prf(
            result(inst, spec, 0.0),
            best_prf(&inst.gold, |g| token_prf(out, g, rules)),
        ),
        MetricKind::RougeL => with_prf(
            result(inst, spec, 0.0),
            best_prf(&inst.gold, |g| rouge_l(out, g, rules)),
        ),
        MetricKind::PassAtK => {
            let k = spec.k.unwrap_or(1);
            if k < 1 {
                return Err(EvalError::Precondition("pass_at_k requires k >= 1".into()));
            }
            // one sample per instance: n = 1, so k is clamped to 1
            let c = contains_match(out, &inst.gold, rules) as u64;
            let mut r = result(inst, spec, pass_at_k(1, c, 1)?);
            if k > 1 {
                r.detail = Some(format!("single sample; k={k} clamped to 1"));
            }
            r
        }
        MetricKind::CitationPrf => {
            let gold: BTreeSet<u64> = inst
                .gold
                .iter()
                .map(|g| {
                    g.trim().parse::<u64>().map_err(|_| {
                        EvalError::Precondition(format!("citation gold '{g}' is not an integer id"))
                    })
                })
                .collect::<Result<_, _>>()?;
            with_prf(result(inst, spec, 0.0), citation_prf(out, &gold))
        }
        MetricKind::NeedleRecall => result(inst, spec, needle_recall(out, &inst.gold, rules)),
        MetricKind::Judge | MetricKind::Unknown(_) => unreachable!("handled above"),
    };
    Ok(r)
}

/// Scores predictions, routing judge metrics to a judge backend.
pub struct Evaluator {
    judge: Option<Arc<dyn Backend>>,
    policy: RetryPolicy,
    rubrics: HashMap<String, String>,
}

impl Evaluator {
    pub fn new(judge: Option<Arc<dyn Backend>>, policy: RetryPolicy) -> Self {
        Self {
            judge,
            policy,
            rubrics: HashMap::new(),
        }
    }

    /// Registers or replaces a rubric template.
    pub fn with_rubric(mut self, id: impl Into<String>, body: impl Into<String>) -> Self {
        self.rubrics.insert(id.into(), body.into());
        self
    }

    fn rubric(&self, id: &str) -> Option<&str> {
        self.rubrics
            .get(id)
            .map(String::as_str)
            .or_else(|| builtin_rubric(id))
    }

    pub async fn score(&self, inst: &TaskInstance, pred: &Prediction) -> Result<MetricResult, EvalError> {
        let spec = &inst.metric;
        if spec.kind != MetricKind::Judge || pred.is_failure() {
            return score_instance(inst, pred, spec);
        }
        let judge = self.judge.as_deref().ok_or(EvalError::JudgeRequired)?;
        let rubric_id = spec.rubric_id.as_deref().unwrap_or(DEFAULT_RUBRIC);
        let rubric = self
            .rubric(rubric_id)
            .ok_or_else(|| EvalError::Precondition(format!("unknown rubric '{rubric_id}'")))?;
        let mut r = result(inst, spec, 0.0);
        match llm_judge(&pred.output_text, inst, rubric, judge, &self.policy).await {
            Ok(score) => r.score = score,
            Err(e) => r.detail = Some(format!("{JUDGE_FAILURE}: {e}")),
        }
        Ok(r)
    }
}
