//! REST control API over a [`Pipeline`].
//!
//! | method | path                 | body / result                         |
//! |--------|----------------------|---------------------------------------|
//! | POST   | `/runs`              | `RunConfig` → 202 `{run_id}`          |
//! | GET    | `/runs`              | `[RunState]`                          |
//! | GET    | `/runs/{id}`         | `RunState`                            |
//! | GET    | `/runs/{id}/report`  | `report.json`                         |
//! | GET    | `/runs/{id}/radar`   | `radar.json`                          |
//! | GET    | `/leaderboard`       | ranked reports of finished runs       |
//! | GET    | `/benchmarks`        | `[BenchmarkSpec]`                     |
//!
//! Runs execute one at a time in submission order on a background task;
//! reads never wait for it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use lceval_core::pipeline::{load_run_report, Phase, Pipeline, PipelineError, ProgressFn, RunState};
use lceval_core::report::build_leaderboard;
use lceval_core::RunConfig;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tower_http::services::ServeDir;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submitted {
    pub run_id: String,
}

/// Body of every 4xx/5xx response. `violations` is set for rejected configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

struct Rejection(StatusCode, ApiError);

impl Rejection {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self(
            status,
            ApiError {
                error: error.into(),
                violations: Vec::new(),
            },
        )
    }

    fn invalid(violations: Vec<String>) -> Self {
        Self(
            StatusCode::BAD_REQUEST,
            ApiError {
                error: "invalid run config".into(),
                violations,
            },
        )
    }
}

impl IntoResponse for Rejection {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type Registry = Arc<RwLock<BTreeMap<String, RunState>>>;

pub struct Service {
    pipeline: Arc<Pipeline>,
    runs: Registry,
    queue: mpsc::UnboundedSender<RunConfig>,
}

impl Service {
    /// Starts the run worker on the current tokio runtime. Finished runs
    /// already on disk are listed as complete.
    pub fn start(pipeline: Pipeline) -> Arc<Self> {
        let pipeline = Arc::new(pipeline);
        let runs: Registry = Arc::new(RwLock::new(scan_finished(pipeline.runs_root())));
        let (queue, rx) = mpsc::unbounded_channel();
        tokio::spawn(worker(pipeline.clone(), runs.clone(), rx));
        Arc::new(Self {
            pipeline,
            runs,
            queue,
        })
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn state(&self, run_id: &str) -> Option<RunState> {
        self.runs.read().unwrap().get(run_id).cloned()
    }

    fn submit(&self, config: RunConfig) -> Result<String, Rejection> {
        if let Err(e) = self.pipeline.check(&config) {
            return Err(match e {
                PipelineError::Invalid(v) => Rejection::invalid(v),
                other => Rejection::invalid(vec![other.to_string()]),
            });
        }
        let id = config.save_tag.clone();
        {
            let mut runs = self.runs.write().unwrap();
            if runs.get(&id).is_some_and(|s| !s.phase.is_terminal()) {
                return Err(Rejection::new(
                    StatusCode::CONFLICT,
                    format!("run '{id}' is already queued or running"),
                ));
            }
            runs.insert(id.clone(), RunState::queued(&id));
        }
        self.queue
            .send(config)
            .map_err(|_| Rejection::new(StatusCode::SERVICE_UNAVAILABLE, "run worker has stopped"))?;
        Ok(id)
    }
}

fn scan_finished(root: &Path) -> BTreeMap<String, RunState> {
    let mut out = BTreeMap::new();
    let Ok(entries) = std::fs::read_dir(root) else {
        return out;
    };
    for entry in entries.flatten() {
        let dir = entry.path();
        if !dir.join("report.json").is_file() {
            continue;
        }
        let Some(id) = dir.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let mut state = RunState::queued(id);
        state.phase = Phase::Complete;
        out.insert(id.to_string(), state);
    }
    out
}

async fn worker(pipeline: Arc<Pipeline>, runs: Registry, mut rx: mpsc::UnboundedReceiver<RunConfig>) {
    while let Some(config) = rx.recv().await {
        let id = config.save_tag.clone();
        let sink = runs.clone();
        let key = id.clone();
        let progress: ProgressFn = Arc::new(move |phase, p| {
            if let Some(s) = sink.write().unwrap().get_mut(&key) {
                s.apply(phase, p);
            }
        });
        tracing::info!(run = %id, "run started");
        let result = pipeline.run(&config, Some(progress)).await;
        let mut runs = runs.write().unwrap();
        let Some(state) = runs.get_mut(&id) else {
            continue;
        };
        match result {
            Ok(_) => {
                let p = state.progress;
                state.apply(Phase::Complete, p);
                tracing::info!(run = %id, "run complete");
            }
            Err(e) => {
                tracing::error!(run = %id, error = %e, "run failed");
                state.fail(e.to_string());
            }
        }
    }
}

pub fn router(service: Arc<Service>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/runs", get(list_runs).post(post_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/report", get(get_report))
        .route("/runs/{id}/radar", get(get_radar))
        .route("/leaderboard", get(get_leaderboard))
        .route("/benchmarks", get(get_benchmarks))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process is stopped.
pub async fn serve(listener: TcpListener, service: Arc<Service>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    axum::serve(listener, router(service, static_dir)).await
}

async fn post_run(State(svc): State<Arc<Service>>, body: Bytes) -> Result<(StatusCode, Json<Submitted>), Rejection> {
    let config: RunConfig = serde_json::from_slice(&body).map_err(|e| Rejection::invalid(vec![format!("body: {e}")]))?;
    let run_id = svc.submit(config)?;
    Ok((StatusCode::ACCEPTED, Json(Submitted { run_id })))
}

async fn list_runs(State(svc): State<Arc<Service>>) -> Json<Vec<RunState>> {
    Json(svc.runs.read().unwrap().values().cloned().collect())
}

async fn get_run(State(svc): State<Arc<Service>>, UrlPath(id): UrlPath<String>) -> Result<Json<RunState>, Rejection> {
    svc.state(&id)
        .map(Json)
        .ok_or_else(|| Rejection::new(StatusCode::NOT_FOUND, format!("unknown run '{id}'")))
}

fn artifact(svc: &Service, id: &str, name: &str) -> Result<Json<Value>, Rejection> {
    let state = svc
        .state(id)
        .ok_or_else(|| Rejection::new(StatusCode::NOT_FOUND, format!("unknown run '{id}'")))?;
    if state.phase != Phase::Complete {
        return Err(Rejection::new(
            StatusCode::NOT_FOUND,
            format!("run '{id}' has no {name} (phase {:?})", state.phase),
        ));
    }
    let path = svc.pipeline.run_dir(id).join(name);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Rejection::new(StatusCode::NOT_FOUND, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map(Json)
        .map_err(|e| Rejection::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display())))
}

async fn get_report(State(svc): State<Arc<Service>>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, Rejection> {
    artifact(&svc, &id, "report.json")
}

async fn get_radar(State(svc): State<Arc<Service>>, UrlPath(id): UrlPath<String>) -> Result<Json<Value>, Rejection> {
    artifact(&svc, &id, "radar.json")
}

async fn get_leaderboard(State(svc): State<Arc<Service>>) -> Json<Value> {
    let finished: Vec<String> = svc
        .runs
        .read()
        .unwrap()
        .values()
        .filter(|s| s.phase == Phase::Complete)
        .map(|s| s.run_id.clone())
        .collect();
    let reports: Vec<_> = finished
        .iter()
        .filter_map(|id| load_run_report(&svc.pipeline.run_dir(id)).ok())
        .map(|r| r.report)
        .collect();
    Json(json!(build_leaderboard(&reports)))
}

async fn get_benchmarks(State(svc): State<Arc<Service>>) -> Json<Value> {
    Json(json!(svc.pipeline.registry().list().collect::<Vec<_>>()))
}
