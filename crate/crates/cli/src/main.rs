mod cli;

use std::io::Write;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::Context;
use clap::Parser;
use lceval_client::{Client, ClientError};
use lceval_core::ingest::BenchmarkRegistry;
use lceval_core::pipeline::{load_run_report, Phase, Pipeline, PipelineError, ProgressFn, RunReport};
use lceval_core::report::{emit_report, ReportFormat};
use lceval_service::Service;

use cli::{build_config, resolve_benchmarks, Cli, Command, ListArgs, ReportArgs, RunArgs, ServeArgs};

/// Exit code 2: the request was rejected (bad config, refused resume).
/// Exit code 1: anything that failed while running.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let rejected = matches!(
            error.downcast_ref::<PipelineError>(),
            Some(PipelineError::Invalid(_) | PipelineError::ResumeRefused(_))
        ) || matches!(error.downcast_ref::<ClientError>(), Some(ClientError::Invalid(_)));
        Self {
            code: if rejected { 2 } else { 1 },
            error,
        }
    }
}

impl Failure {
    fn rejected(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
}

type Outcome = Result<(), Failure>;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args).await,
        Command::ListBenchmarks(args) => list_benchmarks(args).await,
        Command::Report(args) => report(args).await,
        Command::Serve(args) => serve(args).await,
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn phase_printer() -> ProgressFn {
    let last = Mutex::new(None);
    Arc::new(move |phase: Phase, p| {
        let mut last = last.lock().unwrap();
        if *last != Some(phase) {
            *last = Some(phase);
            eprintln!("[{phase:?}] {}/{}", p.done, p.total);
        }
    })
}

fn print_summary(report: &RunReport, run_dir: &str) {
    let table = emit_report(std::slice::from_ref(&report.report), ReportFormat::Markdown);
    print!("{}", String::from_utf8_lossy(&table));
    for (bench, ids) in &report.failures {
        println!("{bench}: {} failed instance(s)", ids.len());
    }
    println!("run directory: {run_dir}");
}

async fn run(args: RunArgs) -> Outcome {
    let mut registry = BenchmarkRegistry::bundled();
    let ids = resolve_benchmarks(&mut registry, &args.cfg_path).map_err(Failure::rejected)?;
    let config = build_config(&args, ids).map_err(Failure::rejected)?;

    if let Some(base) = &args.remote {
        let client = Client::new(base);
        let run_id = client.submit(&config).await?;
        eprintln!("submitted run {run_id}");
        let mut last = None;
        let state = client
            .wait(&run_id, Duration::from_millis(500), Duration::from_secs(7 * 24 * 3600), |s| {
                if last != Some(s.phase) {
                    last = Some(s.phase);
                    eprintln!("[{:?}] {}/{}", s.phase, s.progress.done, s.progress.total);
                }
            })
            .await?;
        if state.phase == Phase::Failed {
            return Err(anyhow::anyhow!("run {run_id} failed: {}", state.error.unwrap_or_default()).into());
        }
        if config.eval_enabled {
            print_summary(&client.report(&run_id).await?, &format!("{base}/runs/{run_id}"));
        }
        return Ok(());
    }

    let pipeline = Pipeline::new(&args.runs_root, registry);
    let outcome = pipeline.run(&config, Some(phase_printer())).await?;
    let dir = outcome.run_dir.display().to_string();
    match &outcome.report {
        Some(report) => print_summary(report, &dir),
        None => println!("{} new prediction(s); run directory: {dir}", outcome.new_predictions),
    }
    Ok(())
}

async fn list_benchmarks(args: ListArgs) -> Outcome {
    let specs = match &args.remote {
        Some(base) => Client::new(base).benchmarks().await?,
        None => {
            let mut registry = BenchmarkRegistry::bundled();
            resolve_benchmarks(&mut registry, &args.cfg_path)?;
            registry.list().cloned().collect()
        }
    };
    let mut out = std::io::stdout().lock();
    if args.json {
        serde_json::to_writer_pretty(&mut out, &specs).context("writing output")?;
        writeln!(out).context("writing output")?;
        return Ok(());
    }
    for s in &specs {
        writeln!(
            out,
            "{:<24} {:<16} {:<14} {}..{} tokens",
            s.id,
            s.capability.to_string(),
            s.metric.kind.to_string(),
            s.declared_length_range.0,
            s.declared_length_range.1
        )
        .context("writing output")?;
    }
    Ok(())
}

async fn report(args: ReportArgs) -> Outcome {
    let format: ReportFormat = args.format.parse()?;
    let mut reports = Vec::with_capacity(args.runs.len());
    for run in &args.runs {
        let report = match &args.remote {
            Some(base) => Client::new(base).report(run).await?,
            None => {
                let as_path = std::path::Path::new(run);
                let dir = if as_path.join("report.json").is_file() {
                    as_path.to_path_buf()
                } else {
                    args.runs_root.join(run)
                };
                load_run_report(&dir).with_context(|| format!("run '{run}'"))?
            }
        };
        reports.push(report.report);
    }
    let bytes = emit_report(&reports, format);
    match &args.out {
        Some(path) => std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(&bytes).context("writing output")?,
    }
    Ok(())
}

async fn serve(args: ServeArgs) -> Outcome {
    let mut registry = BenchmarkRegistry::bundled();
    resolve_benchmarks(&mut registry, &args.cfg_path)?;
    std::fs::create_dir_all(&args.runs_root)
        .with_context(|| format!("creating {}", args.runs_root.display()))?;
    let listener = tokio::net::TcpListener::bind(&args.bind)
        .await
        .with_context(|| format!("binding {}", args.bind))?;
    eprintln!("listening on http://{}", listener.local_addr().context("local address")?);
    let service = Service::start(Pipeline::new(&args.runs_root, registry));
    lceval_service::serve(listener, service, args.static_dir).await?;
    Ok(())
}
