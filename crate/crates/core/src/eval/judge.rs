use std::sync::OnceLock;

use regex::Regex;

use super::EvalError;
use crate::domain::TaskInstance;
use crate::gateway::{complete, Backend, RetryPolicy};
use crate::ingest::fill_placeholders;

pub const DEFAULT_RUBRIC: &str = "default";

const DEFAULT_RUBRIC_BODY: &str = "You are grading a model's answer.\n\
Question: {question}\n\
Reference answer: {gold}\n\
Model answer: {prediction}\n\
Rate the model answer from 1 (useless) to 5 (fully correct and well written). \
Reply with the integer only.";

/// Rubrics shipped with the crate. Placeholders: `{question}`, `{gold}`, `{prediction}`.
pub fn builtin_rubric(id: &str) -> Option<&'static str> {
    match id {
        DEFAULT_RUBRIC => Some(DEFAULT_RUBRIC_BODY),
        _ => None,
    }
}

pub fn render_rubric(rubric: &str, inst: &TaskInstance, prediction: &str) -> String {
    let gold = inst.gold.join(" | ");
    fill_placeholders(
        rubric,
        &[
            ("question", inst.question.as_str()),
            ("gold", gold.as_str()),
            ("prediction", prediction),
        ],
    )
}

/// First integer in the reply whose value lies in 1..=5.
pub fn parse_verdict(reply: &str) -> Option<u8> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\d+").expect("static regex"));
    re.find_iter(reply)
        .filter_map(|m| m.as_str().parse::<u64>().ok())
        .find(|v| (1..=5).contains(v))
        .map(|v| v as u8)
}

/// Asks the judge for a 1-5 verdict and maps it affinely onto [0, 1].
/// Unparseable replies are re-asked up to `policy.max_retries` more times.
pub async fn llm_judge(
    prediction: &str,
    inst: &TaskInstance,
    rubric: &str,
    judge: &dyn Backend,
    policy: &RetryPolicy,
) -> Result<f64, EvalError> {
    let prompt = render_rubric(rubric, inst, prediction);
    let mut last = String::new();
    for _ in 0..=policy.max_retries {
        let p = complete(judge, None, &prompt, inst, policy).await;
        if let Some(f) = p.failure {
            return Err(EvalError::JudgeFailure(f));
        }
        if let Some(v) = parse_verdict(&p.output_text) {
            return Ok(f64::from(v - 1) / 4.0);
        }
        last = p.output_text;
    }
    Err(EvalError::JudgeFailure(format!(
        "no verdict in reply '{}'",
        last.chars().take(80).collect::<String>()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_parsing() {
        assert_eq!(parse_verdict("5"), Some(5));
        assert_eq!(parse_verdict("Score: 4 because it is good"), Some(4));
        assert_eq!(parse_verdict("great"), None);
        assert_eq!(parse_verdict("10/10, I'd say 3"), Some(3));
        assert_eq!(parse_verdict("0"), None);
    }
}
