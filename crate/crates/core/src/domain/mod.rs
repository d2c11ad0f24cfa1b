//! Shared value types.
//!
//! Every type here is an immutable value object with a canonical JSON form
//! (one object per line for collections). Enum-valued fields that come from
//! hand-edited manifests ([`Capability`], [`MetricKind`]) keep unrecognised
//! values as `Unknown(..)` so that [`validate_spec`] can report them alongside
//! every other violation instead of failing at parse time.

mod config;
mod taxonomy;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use config::{
    config_diff, config_fingerprint, AugmentationConfig, RagStrategy, RunConfig,
    FINGERPRINT_EXCLUDED,
};
pub use taxonomy::CapabilityTaxonomy;
pub use validate::validate_spec;

/// The six-way capability grouping used for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Capability {
    Faithfulness,
    General,
    Reasoning,
    Retrieval,
    Generation,
    Specialization,
    Unknown(String),
}

impl Capability {
    /// Known capabilities in reporting (radar axis) order.
    pub const ALL: [Capability; 6] = [
        Capability::Faithfulness,
        Capability::General,
        Capability::Reasoning,
        Capability::Retrieval,
        Capability::Generation,
        Capability::Specialization,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            Capability::Faithfulness => "Faithfulness",
            Capability::General => "General",
            Capability::Reasoning => "Reasoning",
            Capability::Retrieval => "Retrieval",
            Capability::Generation => "Generation",
            Capability::Specialization => "Specialization",
            Capability::Unknown(s) => s,
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, Capability::Unknown(_))
    }
}

impl From<String> for Capability {
    fn from(s: String) -> Self {
        Capability::ALL
            .iter()
            .find(|c| c.as_str() == s)
            .cloned()
            .unwrap_or(Capability::Unknown(s))
    }
}

impl From<Capability> for String {
    fn from(c: Capability) -> Self {
        c.as_str().to_string()
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum MetricKind {
    Exact,
    Contains,
    Choice,
    TokenF1,
    RougeL,
    PassAtK,
    CitationPrf,
    NeedleRecall,
    Judge,
    Unknown(String),
}

impl MetricKind {
    pub const ALL: [MetricKind; 9] = [
        MetricKind::Exact,
        MetricKind::Contains,
        MetricKind::Choice,
        MetricKind::TokenF1,
        MetricKind::RougeL,
        MetricKind::PassAtK,
        MetricKind::CitationPrf,
        MetricKind::NeedleRecall,
        MetricKind::Judge,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            MetricKind::Exact => "exact",
            MetricKind::Contains => "contains",
            MetricKind::Choice => "choice",
            MetricKind::TokenF1 => "token_f1",
            MetricKind::RougeL => "rouge_l",
            MetricKind::PassAtK => "pass_at_k",
            MetricKind::CitationPrf => "citation_prf",
            MetricKind::NeedleRecall => "needle_recall",
            MetricKind::Judge => "judge",
            MetricKind::Unknown(s) => s,
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, MetricKind::Unknown(_))
    }
}

impl From<String> for MetricKind {
    fn from(s: String) -> Self {
        MetricKind::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .cloned()
            .unwrap_or(MetricKind::Unknown(s))
    }
}

impl From<MetricKind> for String {
    fn from(k: MetricKind) -> Self {
        k.as_str().to_string()
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Answer normalization steps. Whatever order a set lists them in, they are
/// applied in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationRule {
    Lowercase,
    StripPunctuation,
    RemoveArticles,
    CollapseWhitespace,
}

impl NormalizationRule {
    pub const ALL: [NormalizationRule; 4] = [
        NormalizationRule::Lowercase,
        NormalizationRule::StripPunctuation,
        NormalizationRule::RemoveArticles,
        NormalizationRule::CollapseWhitespace,
    ];
}

fn default_normalization() -> Vec<NormalizationRule> {
    NormalizationRule::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    #[serde(default = "default_normalization")]
    pub normalization: Vec<NormalizationRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric_id: Option<String>,
}

impl MetricSpec {
    /// A metric with the standard normalization set.
    pub fn new(kind: MetricKind) -> Self {
        Self {
            kind,
            normalization: default_normalization(),
            k: None,
            rubric_id: None,
        }
    }

    pub fn pass_at_k(k: u32) -> Self {
        Self {
            k: Some(k),
            ..Self::new(MetricKind::PassAtK)
        }
    }

    pub fn judge(rubric_id: impl Into<String>) -> Self {
        Self {
            rubric_id: Some(rubric_id.into()),
            ..Self::new(MetricKind::Judge)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    ByteHeuristic,
    Whitespace,
}

/// Tokenizer-free token estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub mode: CostMode,
    #[serde(default = "default_bytes_per_token")]
    pub bytes_per_token: f64,
}

fn default_bytes_per_token() -> f64 {
    4.0
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            mode: CostMode::ByteHeuristic,
            bytes_per_token: default_bytes_per_token(),
        }
    }
}

impl CostModel {
    pub fn whitespace() -> Self {
        Self {
            mode: CostMode::Whitespace,
            ..Self::default()
        }
    }

    pub fn estimate(&self, text: &str) -> u64 {
        match self.mode {
            CostMode::ByteHeuristic => {
                if text.is_empty() {
                    0
                } else {
                    (text.len() as f64 / self.bytes_per_token).ceil() as u64
                }
            }
            CostMode::Whitespace => text.split_whitespace().count() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Niah,
    MultiQueryNiah,
    VariableTracking,
    Counting,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Niah => "niah",
            GeneratorKind::MultiQueryNiah => "multi_query_niah",
            GeneratorKind::VariableTracking => "variable_tracking",
            GeneratorKind::Counting => "counting",
        }
    }
}

/// Generator knobs as written under `source.params` in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub context_tokens: u64,
    pub depth_fractions: Vec<f64>,
    pub needle_count: u32,
    pub chain_length: u32,
    pub instances: u32,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            context_tokens: 2_000,
            depth_fractions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            needle_count: 1,
            chain_length: 1,
            instances: 10,
            seed: 0,
        }
    }
}

/// Fully specified input to one synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub generator: GeneratorKind,
    pub context_tokens: u64,
    pub depth_fractions: Vec<f64>,
    pub needle_count: u32,
    pub chain_length: u32,
    pub instances: u32,
    pub seed: u64,
}

impl SyntheticParams {
    pub fn new(generator: GeneratorKind, p: &GeneratorParams) -> Self {
        Self {
            generator,
            context_tokens: p.context_tokens,
            depth_fractions: p.depth_fractions.clone(),
            needle_count: p.needle_count,
            chain_length: p.chain_length,
            instances: p.instances,
            seed: p.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceDescriptor {
    /// JSON-lines file; relative paths resolve against the manifest's directory.
    Local { uri: PathBuf },
    /// JSON-lines document fetched over HTTP(S).
    Http { uri: String },
    Synthetic {
        generator: GeneratorKind,
        #[serde(default)]
        params: GeneratorParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub id: String,
    pub capability: Capability,
    pub source: SourceDescriptor,
    /// Canonical field name (`context`, `question`, `gold`, optionally
    /// `choices` and `task_id`) → raw record key.
    pub field_map: BTreeMap<String, String>,
    pub template_id: String,
    pub metric: MetricSpec,
    #[serde(rename = "length_range", alias = "declared_length_range")]
    pub declared_length_range: (u64, u64),
}

/// One canonical evaluation item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub instance_id: String,
    pub benchmark_id: String,
    pub task_id: String,
    pub context: String,
    pub question: String,
    /// Reference answers. Citation metrics store integer ids as strings;
    /// needle metrics store the planted values.
    pub gold: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<(String, String)>>,
    pub metric: MetricSpec,
    pub est_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Retrieved,
    FullContext,
}

/// A model output joined to its instance. A failed request is recorded as a
/// prediction with `failure` set and empty output; it scores 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub output_text: String,
    pub backend_id: String,
    pub latency_ms: u64,
    pub attempts: u32,
    pub prompt_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
}

impl Prediction {
    pub fn is_failure(&self) -> bool {
        self.failure.is_some()
    }
}

/// Fingerprint of the exact prompt sent (system preamble + user message).
pub fn prompt_fingerprint(system: Option<&str>, prompt: &str) -> String {
    crate::hash::sha256_parts([system.unwrap_or("").as_bytes(), prompt.as_bytes()])
}
