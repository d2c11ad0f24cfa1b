#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use lceval_core::gateway::{Backend, BackendError, CompletionRequest, ScriptEntry, ScriptedBackend};
use lceval_core::ingest::BenchmarkRegistry;
use lceval_core::pipeline::Pipeline;
use lceval_core::{BackendConfig, RunConfig, TaskInstance};

pub fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .unwrap()
}

pub fn pipeline(root: &Path) -> Pipeline {
    Pipeline::new(root, BenchmarkRegistry::bundled())
}

pub fn config(tag: &str, backend: BackendConfig, benchmarks: &[&str], workers: u32) -> RunConfig {
    RunConfig {
        model_id: "test-model".into(),
        backend,
        benchmark_ids: benchmarks.iter().map(|s| s.to_string()).collect(),
        template_id: None,
        worker_count: workers,
        augmentation: None,
        save_tag: tag.into(),
        seed: 7,
        eval_enabled: true,
        limit: None,
        retry: Default::default(),
        judge_backend: None,
        device: None,
    }
}

/// Answers the gold for the first `correct` instances (in the given order)
/// and a fixed wrong string for the rest.
pub fn scripted_partial(instances: &[TaskInstance], correct: usize) -> ScriptedBackend {
    ScriptedBackend::new(
        "scripted",
        instances.iter().enumerate().map(|(i, inst)| ScriptEntry {
            instance_id: inst.instance_id.clone(),
            output: if i < correct {
                inst.gold.join(" ")
            } else {
                "I could not find it.".into()
            },
            delay_ms: None,
        }),
    )
}

/// Answers the gold and counts calls. Once `block_after` calls have been
/// answered, every later call hangs forever.
pub struct GateBackend {
    pub calls: AtomicUsize,
    block_after: Option<usize>,
}

impl GateBackend {
    pub fn new(block_after: Option<usize>) -> Arc<Self> {
        Arc::new(Self {
            calls: AtomicUsize::new(0),
            block_after,
        })
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl Backend for GateBackend {
    fn id(&self) -> &str {
        "gate"
    }

    async fn generate(&self, req: CompletionRequest<'_>) -> Result<String, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        if self.block_after.is_some_and(|limit| n >= limit) {
            std::future::pending::<()>().await;
        }
        Ok(req.instance.gold.join(" "))
    }
}
