//! Model backends with timeouts, retries and bounded request parallelism.
//!
//! Failures never escape as errors: [`complete`] always returns a
//! [`Prediction`], with `failure` set when every attempt failed.

mod backends;
mod config;
mod oracle;

use std::sync::Arc;
use std::time::Instant;

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use thiserror::Error;

use crate::domain::{prompt_fingerprint, Prediction, TaskInstance};

pub use backends::{
    build_backend, EchoBackend, MockOracleBackend, ScriptEntry, ScriptedBackend, WireApiBackend,
};
pub use config::{BackendConfig, BackendKind, RetryPolicy};
pub use oracle::mock_oracle_complete;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("timed out after {0} ms")]
    Timeout(u64),
    #[error("endpoint returned status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("no scripted output for instance '{0}'")]
    ScriptMiss(String),
    #[error("backend setup failed: {0}")]
    Setup(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::Timeout(_) | BackendError::Status { .. } | BackendError::Transport(_)
        )
    }
}

/// One chat request: optional system preamble plus a single user message.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub system: Option<&'a str>,
    pub prompt: &'a str,
    pub instance: &'a TaskInstance,
}

#[async_trait]
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    async fn generate(&self, req: CompletionRequest<'_>) -> Result<String, BackendError>;

    /// Cheap reachability check made once before a run starts.
    async fn probe(&self) -> Result<(), BackendError> {
        Ok(())
    }
}

/// A prompt ready to send.
#[derive(Debug, Clone)]
pub struct WorkItem {
    pub system: Option<String>,
    pub prompt: String,
    pub instance: TaskInstance,
}

/// Sends one request, retrying retryable errors with exponential backoff.
pub async fn complete(
    backend: &dyn Backend,
    system: Option<&str>,
    prompt: &str,
    instance: &TaskInstance,
    policy: &RetryPolicy,
) -> Prediction {
    let started = Instant::now();
    let timeout = std::time::Duration::from_millis(policy.timeout_ms);
    let req = CompletionRequest {
        system,
        prompt,
        instance,
    };
    let mut attempts = 0;
    let outcome = loop {
        attempts += 1;
        let delay = policy.backoff_before(attempts);
        if !delay.is_zero() {
            tokio::time::sleep(delay).await;
        }
        let result = match tokio::time::timeout(timeout, backend.generate(req)).await {
            Ok(r) => r,
            Err(_) => Err(BackendError::Timeout(policy.timeout_ms)),
        };
        match result {
            Ok(text) => break Ok(text),
            Err(e) if e.is_retryable() && attempts <= policy.max_retries => {
                tracing::debug!(instance = %instance.instance_id, attempts, error = %e, "retrying");
            }
            Err(e) => break Err(e),
        }
    };
    let (output_text, failure) = match outcome {
        Ok(t) => (t, None),
        Err(e) => {
            tracing::warn!(instance = %instance.instance_id, attempts, error = %e, "request failed");
            (String::new(), Some(e.to_string()))
        }
    };
    Prediction {
        instance_id: instance.instance_id.clone(),
        output_text,
        backend_id: backend.id().to_string(),
        latency_ms: started.elapsed().as_millis() as u64,
        attempts,
        prompt_fingerprint: prompt_fingerprint(system, prompt),
        failure,
        route: None,
    }
}

/// Completes every item with at most `parallelism` requests in flight.
/// Results are returned in input order; failures are embedded.
pub async fn complete_batch(
    backend: Arc<dyn Backend>,
    worklist: &[WorkItem],
    policy: &RetryPolicy,
    parallelism: usize,
) -> Vec<Prediction> {
    let parallelism = parallelism.max(1);
    stream::iter(worklist)
        .map(|item| {
            let backend = backend.clone();
            async move {
                complete(
                    backend.as_ref(),
                    item.system.as_deref(),
                    &item.prompt,
                    &item.instance,
                    policy,
                )
                .await
            }
        })
        .buffered(parallelism)
        .collect()
        .await
}
