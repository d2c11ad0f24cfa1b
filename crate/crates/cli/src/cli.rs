use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use lceval_core::ingest::BenchmarkRegistry;
use lceval_core::{AugmentationConfig, BackendConfig, RagStrategy, RetryPolicy, RunConfig};
use serde::de::DeserializeOwned;

#[derive(Debug, Parser)]
#[command(name = "lceval", version, about = "Long-context model evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run (or resume) an evaluation.
    Run(RunArgs),
    /// List the benchmarks that can be referenced by id.
    ListBenchmarks(ListArgs),
    /// Print a leaderboard built from one or more finished runs.
    Report(ReportArgs),
    /// Start the HTTP control service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Model identifier; also the served model name for wire backends.
    #[arg(long = "model_path")]
    pub model_path: String,
    /// Benchmark id, manifest file or directory of manifests. Repeatable.
    #[arg(long = "cfg_path", required = true)]
    pub cfg_path: Vec<String>,
    /// Template id overriding each manifest's template.
    #[arg(long)]
    pub template: Option<String>,
    /// Recorded in the run config only.
    #[arg(long)]
    pub device: Option<String>,
    /// Number of parallel request lanes.
    #[arg(long = "gp_num", default_value_t = 1)]
    pub gp_num: u32,
    /// Backend: a TOML/JSON backend file, an http(s) endpoint URL,
    /// `mock:ACCURACY`, `scripted:PATH` or `echo`.
    #[arg(long)]
    pub server: String,
    /// Retrieval augmentation: `bm25`, `self_route` or a TOML/JSON file.
    #[arg(long)]
    pub acceleration: Option<String>,
    /// Score predictions and write reports.
    #[arg(long)]
    pub eval: bool,
    /// Run directory name under the runs root; defaults to the model name.
    #[arg(long = "save_tag")]
    pub save_tag: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the first N instances of each benchmark.
    #[arg(long)]
    pub limit: Option<u32>,
    /// Judge backend for judge-scored benchmarks (same forms as --server).
    #[arg(long)]
    pub judge: Option<String>,
    #[arg(long = "max_retries")]
    pub max_retries: Option<u32>,
    #[arg(long = "timeout_ms")]
    pub timeout_ms: Option<u64>,
    #[arg(long = "runs_root", default_value = "runs")]
    pub runs_root: PathBuf,
    /// Submit to a running service instead of running in-process.
    #[arg(long)]
    pub remote: Option<String>,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    /// Extra manifest files or directories.
    #[arg(long = "cfg_path")]
    pub cfg_path: Vec<String>,
    #[arg(long)]
    pub remote: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run ids under the runs root, or run directories.
    #[arg(required = true)]
    pub runs: Vec<String>,
    /// json, csv, markdown or radar_json.
    #[arg(long, default_value = "markdown")]
    pub format: String,
    #[arg(long = "runs_root", default_value = "runs")]
    pub runs_root: PathBuf,
    #[arg(long)]
    pub remote: Option<String>,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    #[arg(long = "runs_root", default_value = "runs")]
    pub runs_root: PathBuf,
    /// Extra manifest files or directories.
    #[arg(long = "cfg_path")]
    pub cfg_path: Vec<String>,
    /// Directory of console assets served at `/`.
    #[arg(long = "static_dir")]
    pub static_dir: Option<PathBuf>,
}

fn read_structured<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(anyhow::Error::from),
        _ => toml::from_str(&text).map_err(anyhow::Error::from),
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_backend(spec: &str, model: &str) -> anyhow::Result<BackendConfig> {
    if spec == "echo" {
        return Ok(BackendConfig::echo("echo"));
    }
    if let Some(acc) = spec.strip_prefix("mock:") {
        let acc: f64 = acc.parse().with_context(|| format!("bad accuracy in '{spec}'"))?;
        return Ok(BackendConfig::mock_oracle("mock_oracle", acc));
    }
    if let Some(path) = spec.strip_prefix("scripted:") {
        return Ok(BackendConfig::scripted("scripted", path));
    }
    if spec.starts_with("http://") || spec.starts_with("https://") {
        return Ok(BackendConfig::wire_api("wire_api", spec, model));
    }
    let mut cfg: BackendConfig = read_structured(Path::new(spec))?;
    if cfg.model_name.is_empty() {
        cfg.model_name = model.to_string();
    }
    Ok(cfg)
}

pub fn parse_augmentation(spec: &str) -> anyhow::Result<AugmentationConfig> {
    match spec {
        "bm25" => Ok(AugmentationConfig::new(RagStrategy::Bm25)),
        "self_route" => Ok(AugmentationConfig::new(RagStrategy::SelfRoute)),
        path => read_structured(Path::new(path)),
    }
}

/// Adds manifests named by path to `registry` and returns the benchmark ids
/// in argument order. Arguments that are not paths must be known ids.
pub fn resolve_benchmarks(registry: &mut BenchmarkRegistry, cfg_paths: &[String]) -> anyhow::Result<Vec<String>> {
    let mut ids = Vec::new();
    for arg in cfg_paths {
        let path = Path::new(arg);
        if path.exists() {
            ids.extend(registry.load_path(path)?);
        } else if registry.get(arg).is_ok() {
            ids.push(arg.clone());
        } else {
            bail!("'{arg}' is neither a benchmark id nor a manifest path");
        }
    }
    let mut seen = std::collections::HashSet::new();
    ids.retain(|id| seen.insert(id.clone()));
    Ok(ids)
}

fn default_tag(model: &str) -> String {
    let base = model.trim_end_matches('/').rsplit('/').next().unwrap_or(model);
    let tag: String = base
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if tag.is_empty() {
        "run".into()
    } else {
        tag
    }
}

pub fn build_config(args: &RunArgs, benchmark_ids: Vec<String>) -> anyhow::Result<RunConfig> {
    let mut retry = RetryPolicy::default();
    if let Some(n) = args.max_retries {
        retry.max_retries = n;
    }
    if let Some(ms) = args.timeout_ms {
        retry.timeout_ms = ms;
    }
    Ok(RunConfig {
        model_id: args.model_path.clone(),
        backend: parse_backend(&args.server, &args.model_path)?,
        benchmark_ids,
        template_id: args.template.clone(),
        worker_count: args.gp_num,
        augmentation: args.acceleration.as_deref().map(parse_augmentation).transpose()?,
        save_tag: args.save_tag.clone().unwrap_or_else(|| default_tag(&args.model_path)),
        seed: args.seed,
        eval_enabled: args.eval,
        limit: args.limit,
        retry,
        judge_backend: args
            .judge
            .as_deref()
            .map(|j| parse_backend(j, &args.model_path))
            .transpose()?,
        device: args.device.clone(),
    })
}
