//! Typed client for the lceval control API.

use std::time::{Duration, Instant};

use lceval_core::pipeline::{RunReport, RunState};
use lceval_core::report::LeaderboardRow;
use lceval_core::{BenchmarkSpec, RunConfig};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("rejected config: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("server returned {status}: {message}")]
    Status { status: u16, message: String },
    #[error("run '{0}' did not finish in time")]
    Timeout(String),
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
    #[serde(default)]
    violations: Vec<String>,
}

#[derive(Deserialize)]
struct Submitted {
    run_id: String,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str) -> Self {
        Self {
            base: base.trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await.unwrap_or_default();
        let body: Option<ErrorBody> = serde_json::from_str(&text).ok();
        let message = body.as_ref().map_or(text.clone(), |b| b.error.clone());
        Err(match status {
            StatusCode::BAD_REQUEST => ClientError::Invalid(body.map(|b| b.violations).unwrap_or_else(|| vec![text])),
            StatusCode::NOT_FOUND => ClientError::NotFound(message),
            StatusCode::CONFLICT => ClientError::Conflict(message),
            s => ClientError::Status {
                status: s.as_u16(),
                message,
            },
        })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        Self::decode(self.http.get(self.url(path)).send().await?).await
    }

    /// Queues a run; returns its id.
    pub async fn submit(&self, config: &RunConfig) -> Result<String, ClientError> {
        let resp = self.http.post(self.url("/runs")).json(config).send().await?;
        Ok(Self::decode::<Submitted>(resp).await?.run_id)
    }

    pub async fn runs(&self) -> Result<Vec<RunState>, ClientError> {
        self.get("/runs").await
    }

    pub async fn run(&self, run_id: &str) -> Result<RunState, ClientError> {
        self.get(&format!("/runs/{run_id}")).await
    }

    pub async fn report(&self, run_id: &str) -> Result<RunReport, ClientError> {
        self.get(&format!("/runs/{run_id}/report")).await
    }

    pub async fn radar(&self, run_id: &str) -> Result<serde_json::Value, ClientError> {
        self.get(&format!("/runs/{run_id}/radar")).await
    }

    pub async fn leaderboard(&self) -> Result<Vec<LeaderboardRow>, ClientError> {
        self.get("/leaderboard").await
    }

    pub async fn benchmarks(&self) -> Result<Vec<BenchmarkSpec>, ClientError> {
        self.get("/benchmarks").await
    }

    /// Polls until the run reaches a terminal phase, calling `on_update` with
    /// every observed state.
    pub async fn wait(
        &self,
        run_id: &str,
        interval: Duration,
        timeout: Duration,
        mut on_update: impl FnMut(&RunState),
    ) -> Result<RunState, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            let state = self.run(run_id).await?;
            on_update(&state);
            if state.phase.is_terminal() {
                return Ok(state);
            }
            if Instant::now() >= deadline {
                return Err(ClientError::Timeout(run_id.to_string()));
            }
            tokio::time::sleep(interval).await;
        }
    }
}
