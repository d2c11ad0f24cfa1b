//! Evaluation orchestration for long-context language models.
//!
//! The crate is organised along the life of a run:
//!
//! ```text
//! manifests ─► ingest ─► templates ─► scheduler ─► gateway (+ rag) ─► eval ─► report
//!                                 ╰──────────── pipeline drives all of it ────────────╯
//! ```
//!
//! * [`domain`] holds the shared value types and the config fingerprint used for resume.
//! * [`ingest`] turns benchmark manifests into [`TaskInstance`]s, either from JSON-lines
//!   data or from the deterministic synthetic generators.
//! * [`scheduler`] balances estimated token cost across worker lanes (LPT greedy).
//! * [`gateway`] talks to model backends with bounded concurrency and retries.
//! * [`rag`] chunks, indexes (Okapi BM25) and reassembles contexts, and implements
//!   two-pass self-routing.
//! * [`eval`] scores predictions; [`report`] rolls scores up to benchmark, capability
//!   and overall numbers.
//! * [`pipeline`] ties everything to a run directory with crash-safe resume.

pub mod domain;
pub mod eval;
pub mod gateway;
pub mod hash;
pub mod ingest;
pub mod jsonl;
pub mod pipeline;
pub mod rag;
pub mod report;
pub mod scheduler;

pub use domain::{
    config_diff, config_fingerprint, validate_spec, AugmentationConfig, BenchmarkSpec, Capability,
    CapabilityTaxonomy, CostMode, CostModel, GeneratorKind, GeneratorParams, MetricKind,
    MetricSpec, NormalizationRule, Prediction, RagStrategy, Route, RunConfig, SourceDescriptor,
    SyntheticParams, TaskInstance,
};
pub use gateway::{BackendConfig, BackendKind, RetryPolicy};
