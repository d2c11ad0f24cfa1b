use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{mock_oracle_complete, Backend, BackendConfig, BackendError, BackendKind, CompletionRequest};

/// Instantiates the backend described by `config`. `seed` feeds the mock oracle.
pub fn build_backend(config: &BackendConfig, seed: u64) -> Result<Arc<dyn Backend>, BackendError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(BackendError::Setup(violations.join("; ")));
    }
    Ok(match config.kind {
        BackendKind::Echo => Arc::new(EchoBackend::new(&config.backend_id)),
        BackendKind::MockOracle => Arc::new(MockOracleBackend::new(
            &config.backend_id,
            config.oracle_accuracy.unwrap_or(1.0),
            seed,
        )),
        BackendKind::Scripted => {
            let path = config.script_path.as_deref().expect("validated");
            Arc::new(ScriptedBackend::from_file(&config.backend_id, path)?)
        }
        BackendKind::WireApi => Arc::new(WireApiBackend::new(config)?),
    })
}

/// Returns the prompt unchanged.
pub struct EchoBackend {
    id: String,
}

impl EchoBackend {
    pub fn new(id: &str) -> Self {
        Self { id: id.to_string() }
    }
}

#[async_trait]
impl Backend for EchoBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn generate(&self, req: CompletionRequest<'_>) -> Result<String, BackendError> {
        Ok(req.prompt.to_string())
    }
}

pub struct MockOracleBackend {
    id: String,
    accuracy: f64,
    seed: u64,
}

impl MockOracleBackend {
    pub fn new(id: &str, accuracy: f64, seed: u64) -> Self {
        Self {
            id: id.to_string(),
            accuracy,
            seed,
        }
    }
}

#[async_trait]
impl Backend for MockOracleBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn generate(&self, req: CompletionRequest<'_>) -> Result<String, BackendError> {
        Ok(mock_oracle_complete(req.instance, self.accuracy, self.seed))
    }
}

/// One line of a scripted fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub instance_id: String,
    pub output: String,
    /// Artificial latency before answering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_ms: Option<u64>,
}

/// Answers from a fixture keyed by instance id. Several entries for the same
/// id are served in file order; the last one repeats once the others are used.
/// Every call is logged and in-flight concurrency is tracked.
pub struct ScriptedBackend {
    id: String,
    script: Mutex<HashMap<String, VecDeque<ScriptEntry>>>,
    log: Mutex<Vec<String>>,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(id: &str, entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut script: HashMap<String, VecDeque<ScriptEntry>> = HashMap::new();
        for e in entries {
            script.entry(e.instance_id.clone()).or_default().push_back(e);
        }
        Self {
            id: id.to_string(),
            script: Mutex::new(script),
            log: Mutex::new(Vec::new()),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
        }
    }

    pub fn from_file(id: &str, path: &Path) -> Result<Self, BackendError> {
        let entries: Vec<ScriptEntry> = crate::jsonl::read_all(path)
            .map_err(|e| BackendError::Setup(format!("{}: {e}", path.display())))?;
        Ok(Self::new(id, entries))
    }

    /// Instance ids in the order calls were received.
    pub fn calls(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    fn next_entry(&self, instance_id: &str) -> Option<ScriptEntry> {
        let mut script = self.script.lock().unwrap();
        let queue = script.get_mut(instance_id)?;
        if queue.len() > 1 {
            queue.pop_front()
        } else {
            queue.front().cloned()
        }
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

#[async_trait]
impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn generate(&self, req: CompletionRequest<'_>) -> Result<String, BackendError> {
        let id = &req.instance.instance_id;
        self.log.lock().unwrap().push(id.clone());
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        let _guard = InFlight(&self.in_flight);

        let entry = self
            .next_entry(id)
            .ok_or_else(|| BackendError::ScriptMiss(id.clone()))?;
        if let Some(ms) = entry.delay_ms {
            tokio::time::sleep(Duration::from_millis(ms)).await;
        }
        Ok(entry.output)
    }
}

/// Chat-completion client for OpenAI-compatible servers.
pub struct WireApiBackend {
    id: String,
    endpoint: reqwest::Url,
    model_name: String,
    temperature: f64,
    max_tokens: u32,
    bearer: Option<String>,
    http: reqwest::Client,
}

impl WireApiBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, BackendError> {
        let raw = config.endpoint_url.as_deref().unwrap_or_default();
        let endpoint = reqwest::Url::parse(raw)
            .map_err(|e| BackendError::Setup(format!("endpoint_url '{raw}': {e}")))?;
        let bearer = config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|k| !k.is_empty());
        Ok(Self {
            id: config.backend_id.clone(),
            endpoint,
            model_name: config.model_name.clone(),
            temperature: config.temperature,
            max_tokens: config.max_output_tokens,
            bearer,
            http: reqwest::Client::new(),
        })
    }

    /// The request body sent for `req`.
    pub fn request_body(&self, req: &CompletionRequest<'_>) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = req.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": req.prompt}));
        json!({
            "model": self.model_name,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }
}

#[async_trait]
impl Backend for WireApiBackend {
    fn id(&self) -> &str {
        &self.id
    }

    async fn generate(&self, req: CompletionRequest<'_>) -> Result<String, BackendError> {
        let mut call = self.http.post(self.endpoint.clone()).json(&self.request_body(&req));
        if let Some(key) = &self.bearer {
            call = call.bearer_auth(key);
        }
        let resp = call
            .send()
            .await
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().await.unwrap_or_default();
            return Err(BackendError::Status {
                code: status.as_u16(),
                body: body.chars().take(200).collect(),
            });
        }
        let body: Value = resp
            .json()
            .await
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Protocol("missing choices[0].message.content".into()))
    }

    async fn probe(&self) -> Result<(), BackendError> {
        let host = self
            .endpoint
            .host_str()
            .ok_or_else(|| BackendError::Setup("endpoint has no host".into()))?
            .to_string();
        let port = self
            .endpoint
            .port_or_known_default()
            .ok_or_else(|| BackendError::Setup("endpoint has no port".into()))?;
        match tokio::time::timeout(
            Duration::from_secs(5),
            tokio::net::TcpStream::connect((host.as_str(), port)),
        )
        .await
        {
            Ok(Ok(_)) => Ok(()),
            Ok(Err(e)) => Err(BackendError::Transport(format!("{host}:{port}: {e}"))),
            Err(_) => Err(BackendError::Timeout(5_000)),
        }
    }
}
