use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{BackendConfig, RetryPolicy};
use crate::hash::{canonical_json, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RagStrategy {
    Bm25,
    SelfRoute,
}

/// Retrieval augmentation applied before inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub strategy: RagStrategy,
    #[serde(default = "default_chunk_tokens")]
    pub chunk_tokens: u64,
    #[serde(default = "default_top_k")]
    pub top_k: u32,
    #[serde(default = "default_separator")]
    pub separator: String,
}

fn default_chunk_tokens() -> u64 {
    16_000
}

fn default_top_k() -> u32 {
    4
}

fn default_separator() -> String {
    "\n\n".to_string()
}

impl AugmentationConfig {
    pub fn new(strategy: RagStrategy) -> Self {
        Self {
            strategy,
            chunk_tokens: default_chunk_tokens(),
            top_k: default_top_k(),
            separator: default_separator(),
        }
    }
}

/// Everything that defines one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model_id: String,
    pub backend: BackendConfig,
    pub benchmark_ids: Vec<String>,
    #[serde(default)]
    pub template_id: Option<String>,
    pub worker_count: u32,
    #[serde(default)]
    pub augmentation: Option<AugmentationConfig>,
    pub save_tag: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub eval_enabled: bool,
    /// Per-benchmark cap on ingested instances.
    #[serde(default)]
    pub limit: Option<u32>,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Backend used for `judge` metrics.
    #[serde(default)]
    pub judge_backend: Option<BackendConfig>,
    /// Recorded for provenance only; wire backends place work themselves.
    #[serde(default)]
    pub device: Option<String>,
}

fn default_true() -> bool {
    true
}

/// Fields that name or annotate a run rather than define the experiment.
pub const FINGERPRINT_EXCLUDED: [&str; 2] = ["save_tag", "device"];

impl RunConfig {
    /// Every violated invariant, as `field: message`.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.model_id.trim().is_empty() {
            v.push("model_id: must be nonempty".to_string());
        }
        if self.worker_count < 1 {
            v.push("worker_count: must be at least 1".to_string());
        }
        if self.save_tag.is_empty() {
            v.push("save_tag: must be nonempty".to_string());
        } else if !self
            .save_tag
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            v.push(format!(
                "save_tag: '{}' may only contain ASCII letters, digits, '-' and '_'",
                self.save_tag
            ));
        }
        if self.benchmark_ids.is_empty() {
            v.push("benchmark_ids: must list at least one benchmark".to_string());
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &self.benchmark_ids {
            if !seen.insert(id) {
                v.push(format!("benchmark_ids: duplicate id '{id}'"));
            }
        }
        if let Some(t) = &self.template_id {
            if t.trim().is_empty() {
                v.push("template_id: must be nonempty when given".to_string());
            }
        }
        if self.limit == Some(0) {
            v.push("limit: must be at least 1 when given".to_string());
        }
        v.extend(
            self.backend
                .validate()
                .into_iter()
                .map(|m| format!("backend.{m}")),
        );
        if let Some(j) = &self.judge_backend {
            v.extend(j.validate().into_iter().map(|m| format!("judge_backend.{m}")));
        }
        v.extend(self.retry.validate().into_iter().map(|m| format!("retry.{m}")));
        if let Some(a) = &self.augmentation {
            if a.chunk_tokens < 1 {
                v.push("augmentation.chunk_tokens: must be at least 1".to_string());
            }
            if a.top_k < 1 {
                v.push("augmentation.top_k: must be at least 1".to_string());
            }
        }
        v
    }

    fn fingerprint_value(&self) -> Value {
        let mut value = serde_json::to_value(self).expect("RunConfig serializes");
        if let Value::Object(map) = &mut value {
            for key in FINGERPRINT_EXCLUDED {
                map.remove(key);
            }
        }
        value
    }
}

/// 64-hex-char SHA-256 over the canonical JSON of the config, excluding
/// [`FINGERPRINT_EXCLUDED`] fields.
pub fn config_fingerprint(config: &RunConfig) -> String {
    sha256_hex(canonical_json(&config.fingerprint_value()).as_bytes())
}

/// Dotted paths of fingerprinted fields whose values differ.
pub fn config_diff(old: &RunConfig, new: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    diff_values("", &old.fingerprint_value(), &new.fingerprint_value(), &mut out);
    out
}

fn diff_values(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            let keys: std::collections::BTreeSet<&String> = ma.keys().chain(mb.keys()).collect();
            for k in keys {
                let child = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match (ma.get(k), mb.get(k)) {
                    (Some(x), Some(y)) => diff_values(&child, x, y, out),
                    _ => out.push(child),
                }
            }
        }
        _ if a != b => out.push(path.to_string()),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::BackendKind;

    pub(crate) fn sample() -> RunConfig {
        RunConfig {
            model_id: "m".into(),
            backend: BackendConfig::echo("echo"),
            benchmark_ids: vec!["NIAH".into()],
            template_id: None,
            worker_count: 2,
            augmentation: None,
            save_tag: "run-1".into(),
            seed: 7,
            eval_enabled: true,
            limit: None,
            retry: RetryPolicy::default(),
            judge_backend: None,
            device: None,
        }
    }

    #[test]
    fn fingerprint_is_hex64_and_deterministic() {
        let c = sample();
        let f = config_fingerprint(&c);
        assert_eq!(f.len(), 64);
        assert!(f.chars().all(|ch| ch.is_ascii_hexdigit()));
        let reparsed: RunConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(config_fingerprint(&reparsed), f);
    }

    #[test]
    fn fingerprint_ignores_source_field_order() {
        let a = r#"{"model_id":"m","backend":{"backend_id":"e","kind":"echo","model_name":"x"},
            "benchmark_ids":["NIAH"],"worker_count":1,"save_tag":"a","seed":3}"#;
        let b = r#"{"seed":3,"save_tag":"a","worker_count":1,"benchmark_ids":["NIAH"],
            "backend":{"model_name":"x","kind":"echo","backend_id":"e"},"model_id":"m"}"#;
        let ca: RunConfig = serde_json::from_str(a).unwrap();
        let cb: RunConfig = serde_json::from_str(b).unwrap();
        assert_eq!(config_fingerprint(&ca), config_fingerprint(&cb));
    }

    #[test]
    fn seed_changes_fingerprint_but_save_tag_does_not() {
        let a = sample();
        let mut b = a.clone();
        b.seed = 8;
        assert_ne!(config_fingerprint(&a), config_fingerprint(&b));
        assert_eq!(config_diff(&a, &b), vec!["seed".to_string()]);

        let mut c = a.clone();
        c.save_tag = "renamed".into();
        c.device = Some("cuda:0".into());
        assert_eq!(config_fingerprint(&a), config_fingerprint(&c));
        assert!(config_diff(&a, &c).is_empty());
    }

    #[test]
    fn diff_reports_nested_paths() {
        let a = sample();
        let mut b = a.clone();
        b.backend.kind = BackendKind::MockOracle;
        b.backend.oracle_accuracy = Some(0.5);
        assert_eq!(
            config_diff(&a, &b),
            vec!["backend.kind".to_string(), "backend.oracle_accuracy".to_string()]
        );
    }

    #[test]
    fn validation_names_fields() {
        let mut c = sample();
        c.worker_count = 0;
        c.save_tag = "bad tag!".into();
        c.benchmark_ids = vec!["A".into(), "A".into()];
        let v = c.validate();
        assert!(v.iter().any(|m| m.starts_with("worker_count")));
        assert!(v.iter().any(|m| m.starts_with("save_tag")));
        assert!(v.iter().any(|m| m.starts_with("benchmark_ids")));
        assert!(sample().validate().is_empty());
    }

    fn arb_config() -> impl proptest::strategy::Strategy<Value = RunConfig> {
        use proptest::prelude::*;
        (
            "[a-zA-Z0-9/._-]{1,20}",
            prop::collection::vec("[A-Za-z-]{1,10}", 1..5),
            any::<u64>(),
            1u32..64,
            prop::option::of(1u32..500),
            prop::option::of((1u64..20_000, 1u32..16, any::<bool>())),
            (0.0f64..2.0, any::<bool>(), "[a-z0-9_-]{1,12}"),
        )
            .prop_map(|(model, benches, seed, workers, limit, aug, (temp, eval, tag))| {
                let mut c = sample();
                c.model_id = model;
                c.benchmark_ids = benches;
                c.seed = seed;
                c.worker_count = workers;
                c.limit = limit;
                c.eval_enabled = eval;
                c.save_tag = tag;
                c.backend.temperature = temp;
                c.augmentation = aug.map(|(chunk_tokens, top_k, bm25)| AugmentationConfig {
                    chunk_tokens,
                    top_k,
                    ..AugmentationConfig::new(if bm25 { RagStrategy::Bm25 } else { RagStrategy::SelfRoute })
                });
                c
            })
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(1000))]
        #[test]
        fn fingerprint_survives_reserialization(c in arb_config()) {
            let f = config_fingerprint(&c);
            let json: RunConfig = serde_json::from_str(&serde_json::to_string_pretty(&c).unwrap()).unwrap();
            proptest::prop_assert_eq!(config_fingerprint(&json), f.clone());
            let value: RunConfig = serde_json::from_value(serde_json::to_value(&c).unwrap()).unwrap();
            proptest::prop_assert_eq!(config_fingerprint(&value), f);
        }
    }
}
