//! Manifests, source adapters, synthetic generators and prompt templates.

mod filler;
pub mod synth;
mod template;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::domain::{
    validate_spec, BenchmarkSpec, CostModel, MetricKind, SourceDescriptor, SyntheticParams,
    TaskInstance,
};
use crate::hash::{canonical_json, derive_seed, sha256_parts};

pub use filler::FILLER;
pub use synth::SynthError;
pub use template::{
    apply_template, fill_placeholders, render_choices, PromptTemplate, TemplateError,
    TemplateRegistry,
};

const BUNDLED: [(&str, &str); 4] = [
    ("niah.manifest", include_str!("../../manifests/niah.manifest")),
    ("niah_multi_query.manifest", include_str!("../../manifests/niah_multi_query.manifest")),
    ("ruler.manifest", include_str!("../../manifests/ruler.manifest")),
    ("counting_stars.manifest", include_str!("../../manifests/counting_stars.manifest")),
];

pub const MANIFEST_EXTENSION: &str = "manifest";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed manifest {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("invalid benchmark spec: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("source unreachable: {0}")]
    Unreachable(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("unknown benchmark '{0}'")]
    UnknownBenchmark(String),
}

pub fn estimate_cost(text: &str, model: &CostModel) -> u64 {
    model.estimate(text)
}

/// Stable id: hash of benchmark id, task id and the canonical raw record.
pub fn content_id(benchmark_id: &str, task_id: &str, record: &Value) -> String {
    let canon = canonical_json(record);
    let full = sha256_parts([benchmark_id.as_bytes(), task_id.as_bytes(), canon.as_bytes()]);
    full[..16].to_string()
}

/// Parses manifest text. Relative local paths resolve against `base_dir`.
pub fn parse_manifest(text: &str, origin: &str, base_dir: Option<&Path>) -> Result<BenchmarkSpec, IngestError> {
    let mut spec: BenchmarkSpec = toml::from_str(text).map_err(|e| IngestError::Parse {
        path: origin.to_string(),
        reason: e.to_string(),
    })?;
    if let (SourceDescriptor::Local { uri }, Some(base)) = (&mut spec.source, base_dir) {
        if uri.is_relative() && !uri.as_os_str().is_empty() {
            *uri = base.join(&*uri);
        }
    }
    let violations = validate_spec(&spec);
    if !violations.is_empty() {
        return Err(IngestError::Invalid(violations));
    }
    Ok(spec)
}

pub fn load_manifest(path: &Path) -> Result<BenchmarkSpec, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_manifest(&text, &path.display().to_string(), path.parent())
}

/// Benchmark specs addressable by id.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkRegistry {
    specs: BTreeMap<String, BenchmarkSpec>,
}

impl BenchmarkRegistry {
    /// The synthetic benchmarks shipped with the crate.
    pub fn bundled() -> Self {
        let mut reg = Self::default();
        for (name, text) in BUNDLED {
            let spec = parse_manifest(text, name, None).expect("bundled manifest is valid");
            reg.insert(spec);
        }
        reg
    }

    pub fn insert(&mut self, spec: BenchmarkSpec) -> Option<BenchmarkSpec> {
        self.specs.insert(spec.id.clone(), spec)
    }

    pub fn load_file(&mut self, path: &Path) -> Result<String, IngestError> {
        let spec = load_manifest(path)?;
        let id = spec.id.clone();
        self.insert(spec);
        Ok(id)
    }

    /// Loads every `*.manifest` file in `dir` (not recursive), in name order.
    pub fn load_dir(&mut self, dir: &Path) -> Result<Vec<String>, IngestError> {
        let io = |e: std::io::Error| IngestError::Io {
            path: dir.display().to_string(),
            reason: e.to_string(),
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == MANIFEST_EXTENSION))
            .collect();
        paths.sort();
        paths.iter().map(|p| self.load_file(p)).collect()
    }

    /// File or directory.
    pub fn load_path(&mut self, path: &Path) -> Result<Vec<String>, IngestError> {
        if path.is_dir() {
            self.load_dir(path)
        } else {
            self.load_file(path).map(|id| vec![id])
        }
    }

    pub fn get(&self, id: &str) -> Result<&BenchmarkSpec, IngestError> {
        self.specs
            .get(id)
            .ok_or_else(|| IngestError::UnknownBenchmark(id.to_string()))
    }

    pub fn list(&self) -> impl Iterator<Item = &BenchmarkSpec> {
        self.specs.values()
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub limit: Option<u32>,
    pub seed: u64,
    pub cost_model: CostModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipReport {
    pub record_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOutput {
    pub instances: Vec<TaskInstance>,
    pub skipped: Vec<SkipReport>,
}

/// Produces the canonical instances of a benchmark, in deterministic order.
/// `limit` keeps the first N instances after normalization.
pub async fn ingest(
    spec: &BenchmarkSpec,
    template: &PromptTemplate,
    opts: &IngestOptions,
) -> Result<IngestOutput, IngestError> {
    let mut out = match &spec.source {
        SourceDescriptor::Local { uri } => {
            let text = std::fs::read_to_string(uri)
                .map_err(|e| IngestError::Unreachable(format!("{}: {e}", uri.display())))?;
            normalize_records(spec, &text)
        }
        SourceDescriptor::Http { uri } => {
            let text = fetch(uri).await?;
            normalize_records(spec, &text)
        }
        SourceDescriptor::Synthetic { generator, params } => {
            let mut p = SyntheticParams::new(*generator, params);
            p.seed = derive_seed(&format!("{}:{}", spec.id, params.seed), opts.seed);
            let instances = synth::generate(&p)?
                .into_iter()
                .map(|mut inst| {
                    let record = serde_json::json!({
                        "context": inst.context,
                        "question": inst.question,
                        "gold": inst.gold,
                    });
                    inst.instance_id = content_id(&spec.id, &inst.task_id, &record);
                    inst.benchmark_id = spec.id.clone();
                    inst.metric = spec.metric.clone();
                    inst
                })
                .collect();
            IngestOutput {
                instances,
                skipped: Vec::new(),
            }
        }
    };
    if let Some(n) = opts.limit {
        out.instances.truncate(n as usize);
    }
    for inst in &mut out.instances {
        inst.est_tokens = estimate_cost(&apply_template(template, inst)?, &opts.cost_model);
    }
    Ok(out)
}

async fn fetch(uri: &str) -> Result<String, IngestError> {
    let unreachable = |e: reqwest::Error| IngestError::Unreachable(format!("{uri}: {e}"));
    reqwest::get(uri)
        .await
        .and_then(|r| r.error_for_status())
        .map_err(unreachable)?
        .text()
        .await
        .map_err(unreachable)
}

fn normalize_records(spec: &BenchmarkSpec, text: &str) -> IngestOutput {
    let mut out = IngestOutput::default();
    let mut seen = HashSet::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let skip = |reason: String| SkipReport {
            record_index: index,
            reason,
        };
        let record: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                out.skipped.push(skip(format!("unparseable record: {e}")));
                continue;
            }
        };
        match normalize_record(spec, &record) {
            Ok(inst) if !seen.insert(inst.instance_id.clone()) => {
                out.skipped.push(skip(format!("duplicate of instance {}", inst.instance_id)));
            }
            Ok(inst) => out.instances.push(inst),
            Err(reason) => out.skipped.push(skip(reason)),
        }
    }
    out
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn mapped<'a>(spec: &BenchmarkSpec, obj: &'a serde_json::Map<String, Value>, field: &str) -> Result<Option<&'a Value>, String> {
    match spec.field_map.get(field) {
        None => Ok(None),
        Some(raw) => obj
            .get(raw)
            .map(Some)
            .ok_or_else(|| format!("missing field '{raw}' (mapped to {field})")),
    }
}

fn normalize_record(spec: &BenchmarkSpec, record: &Value) -> Result<TaskInstance, String> {
    let obj = record.as_object().ok_or("record is not a JSON object")?;
    let text_field = |field: &str| -> Result<String, String> {
        let v = mapped(spec, obj, field)?.ok_or_else(|| format!("no mapping for {field}"))?;
        text_of(v).ok_or_else(|| format!("field {field} is not text"))
    };
    let context = text_field("context")?;
    let question = text_field("question")?;
    let gold_raw = mapped(spec, obj, "gold")?.ok_or("no mapping for gold")?;
    let gold: Vec<String> = match gold_raw {
        Value::Array(items) => items
            .iter()
            .map(|g| text_of(g).ok_or("gold entries must be text"))
            .collect::<Result<_, _>>()?,
        other => vec![text_of(other).ok_or("gold must be text or a list")?],
    };
    if gold.is_empty() && spec.metric.kind != MetricKind::Judge {
        return Err("gold is empty".into());
    }
    let choices = match mapped(spec, obj, "choices")? {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            if items.len() > 26 {
                return Err("more than 26 choices".into());
            }
            Some(
                items
                    .iter()
                    .zip('A'..='Z')
                    .map(|(t, l)| text_of(t).map(|t| (l.to_string(), t)))
                    .collect::<Option<Vec<_>>>()
                    .ok_or("choice entries must be text")?,
            )
        }
        Some(Value::Object(m)) => Some(
            m.iter()
                .map(|(l, t)| text_of(t).map(|t| (l.clone(), t)))
                .collect::<Option<Vec<_>>>()
                .ok_or("choice entries must be text")?,
        ),
        Some(_) => return Err("choices must be a list or an object".into()),
    };
    let task_id = match mapped(spec, obj, "task_id")? {
        Some(v) => text_of(v).ok_or("task_id must be text")?,
        None => spec.id.clone(),
    };
    Ok(TaskInstance {
        instance_id: content_id(&spec.id, &task_id, record),
        benchmark_id: spec.id.clone(),
        task_id,
        context,
        question,
        gold,
        choices,
        metric: spec.metric.clone(),
        est_tokens: 0,
    })
}
