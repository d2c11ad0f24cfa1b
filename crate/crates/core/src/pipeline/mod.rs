//! End-to-end runs over a run directory, with crash-safe resume.
//!
//! Layout of `runs/<save_tag>/`:
//!
//! ```text
//! config.json              snapshot; its fingerprint gates resume
//! data/<bench>.jsonl       normalized instances
//! plan.json                worker assignment per benchmark
//! predictions/<bench>.jsonl  appended as predictions complete
//! metrics/<bench>.json     per-instance results plus summary
//! report.json report.md radar.json timing.json
//! ```

mod state;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::Utc;
use futures::future::join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    config_diff, config_fingerprint, AugmentationConfig, BenchmarkSpec, CapabilityTaxonomy,
    CostModel, MetricKind, Prediction, RagStrategy, RunConfig, TaskInstance,
};
use crate::eval::{Evaluator, MetricResult};
use crate::gateway::{build_backend, complete, Backend, BackendError, RetryPolicy};
use crate::ingest::{
    apply_template, ingest, BenchmarkRegistry, IngestError, IngestOptions, PromptTemplate,
    SkipReport, TemplateError, TemplateRegistry,
};
use crate::jsonl::{self, JsonlAppender};
use crate::rag;
use crate::report::{
    aggregate_benchmark, capability_scores, emit_report, radar_json, round2, timing_summary,
    BenchmarkScore, BenchmarkTiming, CapabilityReport, ReportError, ReportFormat, TimingSummary,
};
use crate::scheduler::{balance_report, plan_lpt, Assignment, BalanceReport};

pub use state::{Phase, Progress, RunState};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run config: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("backend unavailable: {0}")]
    Backend(#[from] BackendError),
    #[error("run directory holds a different config; changed fields: {}", .0.join(", "))]
    ResumeRefused(Vec<String>),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> PipelineError {
    let context = context.into();
    move |source| PipelineError::Io { context, source }
}

/// Called on every phase or progress change.
pub type ProgressFn = Arc<dyn Fn(Phase, Progress) + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub benchmark_id: String,
    pub assignment: Assignment,
    pub balance: BalanceReport,
    pub instance_count: usize,
    pub total_cost: u64,
}

/// Contents of `report.json`; free of timestamps so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub model_id: String,
    pub config_fingerprint: String,
    pub report: CapabilityReport,
    pub benchmarks: Vec<BenchmarkScore>,
    /// Benchmark → instance ids whose request or verdict failed.
    pub failures: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsFile {
    pub benchmark_id: String,
    pub summary: BenchmarkScore,
    pub results: Vec<MetricResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingFile {
    pub stamps: Vec<BenchmarkTiming>,
    pub summary: TimingSummary,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    /// `None` when evaluation is disabled.
    pub report: Option<RunReport>,
    /// Backend requests issued by this invocation (resumed instances excluded).
    pub new_predictions: usize,
}

struct Prepared {
    spec: BenchmarkSpec,
    template: PromptTemplate,
    instances: Vec<TaskInstance>,
}

pub struct Pipeline {
    runs_root: PathBuf,
    registry: BenchmarkRegistry,
    templates: TemplateRegistry,
    cost_model: CostModel,
}

impl Pipeline {
    pub fn new(runs_root: impl Into<PathBuf>, registry: BenchmarkRegistry) -> Self {
        Self {
            runs_root: runs_root.into(),
            registry,
            templates: TemplateRegistry::default(),
            cost_model: CostModel::default(),
        }
    }

    pub fn with_templates(mut self, templates: TemplateRegistry) -> Self {
        self.templates = templates;
        self
    }

    pub fn registry(&self) -> &BenchmarkRegistry {
        &self.registry
    }

    pub fn runs_root(&self) -> &Path {
        &self.runs_root
    }

    pub fn run_dir(&self, save_tag: &str) -> PathBuf {
        self.runs_root.join(save_tag)
    }

    /// Checks the config and that every benchmark and template resolves.
    pub fn check(&self, config: &RunConfig) -> Result<(), PipelineError> {
        let mut v = config.validate();
        for id in &config.benchmark_ids {
            match self.registry.get(id) {
                Err(e) => v.push(format!("benchmark_ids: {e}")),
                Ok(spec) => {
                    let tid = config.template_id.as_deref().unwrap_or(&spec.template_id);
                    if let Err(e) = self.templates.get(tid) {
                        v.push(format!("template_id: {e}"));
                    }
                    if spec.metric.kind == MetricKind::Judge && config.judge_backend.is_none() {
                        v.push(format!(
                            "judge_backend: benchmark '{id}' uses a judge metric but no judge backend is configured"
                        ));
                    }
                }
            }
        }
        v.dedup();
        if v.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Invalid(v))
        }
    }

    fn template_for(&self, config: &RunConfig, spec: &BenchmarkSpec) -> Result<PromptTemplate, PipelineError> {
        let tid = config.template_id.as_deref().unwrap_or(&spec.template_id);
        Ok(self.templates.get(tid)?.clone())
    }

    /// Instances the run would evaluate for one benchmark.
    pub async fn instances(&self, config: &RunConfig, benchmark_id: &str) -> Result<Vec<TaskInstance>, PipelineError> {
        let spec = self.registry.get(benchmark_id)?;
        let template = self.template_for(config, spec)?;
        Ok(ingest(spec, &template, &self.ingest_options(config)).await?.instances)
    }

    fn ingest_options(&self, config: &RunConfig) -> IngestOptions {
        IngestOptions {
            limit: config.limit,
            seed: config.seed,
            cost_model: self.cost_model,
        }
    }

    /// Builds backends from the config and runs.
    pub async fn run(&self, config: &RunConfig, progress: Option<ProgressFn>) -> Result<RunOutcome, PipelineError> {
        self.check(config)?;
        let backend = build_backend(&config.backend, config.seed)?;
        let judge = config
            .judge_backend
            .as_ref()
            .map(|j| build_backend(j, config.seed))
            .transpose()?;
        self.run_with_backend(config, backend, judge, progress).await
    }

    /// Runs with caller-supplied backends; the config's backend sections are
    /// still part of the snapshot.
    pub async fn run_with_backend(
        &self,
        config: &RunConfig,
        backend: Arc<dyn Backend>,
        judge: Option<Arc<dyn Backend>>,
        progress: Option<ProgressFn>,
    ) -> Result<RunOutcome, PipelineError> {
        self.check(config)?;
        let notify = |phase: Phase, done: u64, total: u64| {
            if let Some(p) = &progress {
                p(phase, Progress { done, total });
            }
        };
        let run_dir = self.run_dir(&config.save_tag);
        self.snapshot_config(&run_dir, config)?;

        backend.probe().await?;
        if let Some(j) = &judge {
            j.probe().await?;
        }

        notify(Phase::Ingesting, 0, 0);
        let mut prepared = Vec::with_capacity(config.benchmark_ids.len());
        let mut skipped: BTreeMap<String, Vec<SkipReport>> = BTreeMap::new();
        for id in &config.benchmark_ids {
            let spec = self.registry.get(id)?.clone();
            let template = self.template_for(config, &spec)?;
            let out = ingest(&spec, &template, &self.ingest_options(config)).await?;
            for s in &out.skipped {
                tracing::warn!(benchmark = %id, record = s.record_index, reason = %s.reason, "skipped record");
            }
            if !out.skipped.is_empty() {
                skipped.insert(id.clone(), out.skipped);
            }
            let path = run_dir.join("data").join(format!("{id}.jsonl"));
            jsonl::write_atomic(&path, &out.instances).map_err(io_err(path.display().to_string()))?;
            prepared.push(Prepared {
                spec,
                template,
                instances: out.instances,
            });
        }
        if !skipped.is_empty() {
            write_json(&run_dir.join("data").join("skipped.json"), &skipped)?;
        }
        let total: u64 = prepared.iter().map(|p| p.instances.len() as u64).sum();

        notify(Phase::Scheduling, 0, total);
        let plans: Vec<PlanEntry> = prepared
            .iter()
            .map(|p| {
                let costs: Vec<(String, u64)> = p
                    .instances
                    .iter()
                    .map(|i| (i.instance_id.clone(), i.est_tokens))
                    .collect();
                let assignment = plan_lpt(&costs, config.worker_count as usize);
                PlanEntry {
                    benchmark_id: p.spec.id.clone(),
                    balance: balance_report(&assignment),
                    assignment,
                    instance_count: costs.len(),
                    total_cost: costs.iter().map(|c| c.1).sum(),
                }
            })
            .collect();
        write_json(&run_dir.join("plan.json"), &plans)?;

        let mut existing: Vec<HashMap<String, Prediction>> = Vec::with_capacity(prepared.len());
        for p in &prepared {
            existing.push(self.recover_predictions(&run_dir, &p.spec.id)?);
        }
        let done_before: u64 = prepared
            .iter()
            .zip(&existing)
            .map(|(p, e)| p.instances.iter().filter(|i| is_done(e, &i.instance_id)).count() as u64)
            .sum();
        let done = Arc::new(Mutex::new(done_before));
        notify(Phase::Inferring, done_before, total);

        let mut stamps = Vec::with_capacity(prepared.len());
        let mut new_predictions = 0usize;
        for ((p, plan), prior) in prepared.iter().zip(&plans).zip(existing.iter_mut()) {
            let started = Utc::now();
            let pending: HashSet<&str> = p
                .instances
                .iter()
                .filter(|i| !is_done(prior, &i.instance_id))
                .map(|i| i.instance_id.as_str())
                .collect();
            if !pending.is_empty() {
                let by_id: HashMap<&str, &TaskInstance> =
                    p.instances.iter().map(|i| (i.instance_id.as_str(), i)).collect();
                let path = run_dir.join("predictions").join(format!("{}.jsonl", p.spec.id));
                let appender = Mutex::new(JsonlAppender::open(&path).map_err(io_err(path.display().to_string()))?);
                let lanes = plan.assignment.worker_loads.iter().map(|lane| {
                    let lane: Vec<&TaskInstance> = lane
                        .iter()
                        .filter(|id| pending.contains(id.as_str()))
                        .map(|id| by_id[id.as_str()])
                        .collect();
                    let (backend, appender, done, notify, path) = (&backend, &appender, &done, &notify, &path);
                    async move {
                        let mut out = Vec::with_capacity(lane.len());
                        for inst in lane {
                            let pred = infer_one(
                                inst,
                                &p.template,
                                backend.as_ref(),
                                &config.retry,
                                config.augmentation.as_ref(),
                                &self.cost_model,
                            )
                            .await;
                            appender
                                .lock()
                                .unwrap()
                                .append(&pred)
                                .map_err(io_err(path.display().to_string()))?;
                            let now = {
                                let mut d = done.lock().unwrap();
                                *d += 1;
                                *d
                            };
                            notify(Phase::Inferring, now, total);
                            out.push(pred);
                        }
                        Ok::<_, PipelineError>(out)
                    }
                });
                for lane in join_all(lanes).await {
                    for pred in lane? {
                        new_predictions += 1;
                        prior.insert(pred.instance_id.clone(), pred);
                    }
                }
            }
            stamps.push(BenchmarkTiming {
                benchmark_id: p.spec.id.clone(),
                started,
                finished: Utc::now(),
            });
        }
        let summary = timing_summary(&stamps)?;
        write_json(&run_dir.join("timing.json"), &TimingFile { stamps, summary })?;

        if !config.eval_enabled {
            notify(Phase::Complete, total, total);
            return Ok(RunOutcome {
                run_dir,
                report: None,
                new_predictions,
            });
        }

        notify(Phase::Scoring, total, total);
        let evaluator = Evaluator::new(judge, config.retry.clone());
        let mut scores = Vec::with_capacity(prepared.len());
        let mut failures = BTreeMap::new();
        for (p, preds) in prepared.iter().zip(&existing) {
            let mut results = Vec::with_capacity(p.instances.len());
            for inst in &p.instances {
                let pred = &preds[&inst.instance_id];
                let r = match evaluator.score(inst, pred).await {
                    Ok(r) => r,
                    Err(e) => {
                        tracing::warn!(instance = %inst.instance_id, error = %e, "scoring error");
                        MetricResult {
                            instance_id: inst.instance_id.clone(),
                            metric_kind: inst.metric.kind.to_string(),
                            score: 0.0,
                            components: None,
                            detail: Some(format!("scoring_error: {e}")),
                        }
                    }
                };
                results.push(r);
            }
            let summary = aggregate_benchmark(&p.spec.id, &results)?;
            let failed: Vec<String> = results
                .iter()
                .filter(|r| r.is_failure())
                .map(|r| r.instance_id.clone())
                .collect();
            if !failed.is_empty() {
                failures.insert(p.spec.id.clone(), failed);
            }
            write_json(
                &run_dir.join("metrics").join(format!("{}.json", p.spec.id)),
                &MetricsFile {
                    benchmark_id: p.spec.id.clone(),
                    summary: summary.clone(),
                    results,
                },
            )?;
            scores.push(summary);
        }

        let rounded: BTreeMap<String, f64> = scores
            .iter()
            .map(|s| (s.benchmark_id.clone(), round2(s.mean_score)))
            .collect();
        let taxonomy = CapabilityTaxonomy::from_specs(prepared.iter().map(|p| &p.spec))
            .map_err(|e| PipelineError::Invalid(vec![format!("benchmark_ids: {e}")]))?;
        let report = capability_scores(&config.model_id, &rounded, &taxonomy)?;
        let run_report = RunReport {
            run_id: config.save_tag.clone(),
            model_id: config.model_id.clone(),
            config_fingerprint: config_fingerprint(config),
            report: report.clone(),
            benchmarks: scores,
            failures,
        };
        write_json(&run_dir.join("report.json"), &run_report)?;
        let reports = [report];
        write_bytes(&run_dir.join("report.md"), &emit_report(&reports, ReportFormat::Markdown))?;
        write_json(&run_dir.join("radar.json"), &radar_json(&reports))?;
        notify(Phase::Complete, total, total);
        Ok(RunOutcome {
            run_dir,
            report: Some(run_report),
            new_predictions,
        })
    }

    /// Writes `config.json` for a fresh run, or refuses when an existing
    /// snapshot has a different fingerprint.
    fn snapshot_config(&self, run_dir: &Path, config: &RunConfig) -> Result<(), PipelineError> {
        let path = run_dir.join("config.json");
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(io_err(path.display().to_string()))?;
            let old: RunConfig = serde_json::from_str(&text).map_err(|e| PipelineError::Io {
                context: path.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            })?;
            if config_fingerprint(&old) != config_fingerprint(config) {
                return Err(PipelineError::ResumeRefused(config_diff(&old, config)));
            }
            return Ok(());
        }
        write_json(&path, config)
    }

    /// Loads prior predictions; later records win. Torn or unparseable lines
    /// are moved to `<bench>.jsonl.quarantine` and the file is rewritten
    /// without them.
    fn recover_predictions(&self, run_dir: &Path, benchmark_id: &str) -> Result<HashMap<String, Prediction>, PipelineError> {
        let path = run_dir.join("predictions").join(format!("{benchmark_id}.jsonl"));
        let lines = jsonl::read_lenient::<Prediction>(&path).map_err(io_err(path.display().to_string()))?;
        if !lines.rejected.is_empty() {
            tracing::warn!(
                file = %path.display(),
                count = lines.rejected.len(),
                "quarantining corrupt prediction records"
            );
            let qpath = path.with_extension("jsonl.quarantine");
            let mut q = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&qpath)
                .map_err(io_err(qpath.display().to_string()))?;
            for (_, raw) in &lines.rejected {
                writeln!(q, "{raw}").map_err(io_err(qpath.display().to_string()))?;
            }
            q.sync_all().map_err(io_err(qpath.display().to_string()))?;
            jsonl::write_atomic(&path, &lines.records).map_err(io_err(path.display().to_string()))?;
        }
        Ok(lines
            .records
            .into_iter()
            .map(|p| (p.instance_id.clone(), p))
            .collect())
    }
}

fn is_done(prior: &HashMap<String, Prediction>, id: &str) -> bool {
    prior.get(id).is_some_and(|p| !p.is_failure())
}

async fn infer_one(
    inst: &TaskInstance,
    template: &PromptTemplate,
    backend: &dyn Backend,
    policy: &RetryPolicy,
    aug: Option<&AugmentationConfig>,
    cost: &CostModel,
) -> Prediction {
    let system = template.system_preamble.as_deref();
    let outcome = match aug {
        None => match apply_template(template, inst) {
            Ok(prompt) => Ok(complete(backend, system, &prompt, inst, policy).await),
            Err(e) => Err(e.to_string()),
        },
        Some(a) if a.strategy == RagStrategy::Bm25 => rag::bm25_complete(inst, template, backend, policy, a, cost)
            .await
            .map_err(|e| e.to_string()),
        Some(a) => rag::self_route(inst, template, backend, policy, a, cost)
            .await
            .map(|(p, _)| p)
            .map_err(|e| e.to_string()),
    };
    outcome.unwrap_or_else(|e| Prediction {
        instance_id: inst.instance_id.clone(),
        output_text: String::new(),
        backend_id: backend.id().to_string(),
        latency_ms: 0,
        attempts: 1,
        prompt_fingerprint: String::new(),
        failure: Some(e),
        route: None,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    jsonl::write_bytes_atomic(path, bytes).map_err(io_err(path.display().to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

/// Reads `report.json` from a run directory.
pub fn load_run_report(run_dir: &Path) -> Result<RunReport, PipelineError> {
    let path = run_dir.join("report.json");
    let text = std::fs::read_to_string(&path).map_err(io_err(path.display().to_string()))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Io {
        context: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

#[cfg(test)]
mod tests;
