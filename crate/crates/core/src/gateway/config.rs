use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Chat-completion endpoint (vLLM, SGLang, hosted APIs, ...).
    WireApi,
    MockOracle,
    Scripted,
    Echo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script_path: Option<PathBuf>,
}

fn default_max_output_tokens() -> u32 {
    512
}

impl BackendConfig {
    fn base(backend_id: &str, kind: BackendKind) -> Self {
        Self {
            backend_id: backend_id.to_string(),
            kind,
            endpoint_url: None,
            api_key_env: None,
            model_name: String::new(),
            max_output_tokens: default_max_output_tokens(),
            temperature: 0.0,
            oracle_accuracy: None,
            script_path: None,
        }
    }

    pub fn echo(backend_id: &str) -> Self {
        Self::base(backend_id, BackendKind::Echo)
    }

    pub fn mock_oracle(backend_id: &str, accuracy: f64) -> Self {
        Self {
            oracle_accuracy: Some(accuracy),
            ..Self::base(backend_id, BackendKind::MockOracle)
        }
    }

    pub fn scripted(backend_id: &str, script_path: impl Into<PathBuf>) -> Self {
        Self {
            script_path: Some(script_path.into()),
            ..Self::base(backend_id, BackendKind::Scripted)
        }
    }

    pub fn wire_api(backend_id: &str, endpoint_url: &str, model_name: &str) -> Self {
        Self {
            endpoint_url: Some(endpoint_url.to_string()),
            model_name: model_name.to_string(),
            ..Self::base(backend_id, BackendKind::WireApi)
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.backend_id.trim().is_empty() {
            v.push("backend_id: must be nonempty".to_string());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            v.push("temperature: must be >= 0".to_string());
        }
        if self.max_output_tokens < 1 {
            v.push("max_output_tokens: must be at least 1".to_string());
        }
        if let Some(a) = self.oracle_accuracy {
            if !(0.0..=1.0).contains(&a) {
                v.push("oracle_accuracy: must lie in [0, 1]".to_string());
            }
        }
        match self.kind {
            BackendKind::WireApi => {
                if self.endpoint_url.as_deref().unwrap_or("").is_empty() {
                    v.push("endpoint_url: required for wire_api".to_string());
                }
                if self.model_name.is_empty() {
                    v.push("model_name: required for wire_api".to_string());
                }
            }
            BackendKind::MockOracle => {
                if self.oracle_accuracy.is_none() {
                    v.push("oracle_accuracy: required for mock_oracle".to_string());
                }
            }
            BackendKind::Scripted => {
                if self.script_path.is_none() {
                    v.push("script_path: required for scripted".to_string());
                }
            }
            BackendKind::Echo => {}
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub timeout_ms: u64,
    /// Delay before the first retry; doubles for each later retry.
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            timeout_ms: 120_000,
            backoff_base_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.timeout_ms < 1 {
            v.push("timeout_ms: must be at least 1".to_string());
        }
        if self.backoff_base_ms < 1 {
            v.push("backoff_base_ms: must be at least 1".to_string());
        }
        v
    }

    /// Delay before attempt `attempt` (1-based; the first attempt has none).
    pub fn backoff_before(&self, attempt: u32) -> std::time::Duration {
        if attempt <= 1 {
            return std::time::Duration::ZERO;
        }
        let shift = (attempt - 2).min(20);
        std::time::Duration::from_millis(self.backoff_base_ms.saturating_mul(1u64 << shift))
    }
}
