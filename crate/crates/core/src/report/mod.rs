//! Benchmark → capability → overall rollup, leaderboards and report files.

mod emit;
mod timing;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Capability, CapabilityTaxonomy};
use crate::eval::MetricResult;

pub use emit::{emit_report, radar_json, ReportFormat};
pub use timing::{format_hms, timing_summary, BenchmarkTiming, TimingRow, TimingSummary};

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("no results for benchmark '{0}'")]
    Empty(String),
    #[error("scores missing for benchmarks: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("timing for '{0}' ends before it starts")]
    Timing(String),
    #[error("unknown report format '{0}' (expected json, csv, markdown or radar_json)")]
    UnknownFormat(String),
}

/// Two decimals, halves rounded up. The epsilon absorbs binary noise such
/// as 51.535 being stored as 51.53499999....
pub fn round2(x: f64) -> f64 {
    (x * 100.0 + 0.5 + 1e-7).floor() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkScore {
    pub benchmark_id: String,
    /// 0-100, unrounded.
    pub mean_score: f64,
    pub instance_count: usize,
    pub failure_count: usize,
}

/// `100 × mean(score)`; failures count as 0.
pub fn aggregate_benchmark(benchmark_id: &str, results: &[MetricResult]) -> Result<BenchmarkScore, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty(benchmark_id.to_string()));
    }
    let total: f64 = results
        .iter()
        .map(|r| if r.is_failure() { 0.0 } else { r.score })
        .sum();
    Ok(BenchmarkScore {
        benchmark_id: benchmark_id.to_string(),
        mean_score: 100.0 * total / results.len() as f64,
        instance_count: results.len(),
        failure_count: results.iter().filter(|r| r.is_failure()).count(),
    })
}

fn covered<'a>(scores: &BTreeMap<String, f64>, taxonomy: &'a CapabilityTaxonomy) -> Result<Vec<&'a str>, ReportError> {
    let order = taxonomy.benchmark_order();
    let missing: Vec<String> = order
        .iter()
        .filter(|b| !scores.contains_key(**b))
        .map(|b| b.to_string())
        .collect();
    if missing.is_empty() {
        Ok(order)
    } else {
        Err(ReportError::Missing(missing))
    }
}

/// Unrounded flat mean over every taxonomy benchmark.
pub fn flat_mean(scores: &BTreeMap<String, f64>, taxonomy: &CapabilityTaxonomy) -> Result<f64, ReportError> {
    let order = covered(scores, taxonomy)?;
    if order.is_empty() {
        return Err(ReportError::Missing(Vec::new()));
    }
    Ok(order.iter().map(|b| scores[*b]).sum::<f64>() / order.len() as f64)
}

/// Flat mean over every taxonomy benchmark (not a mean of capability
/// means), rounded to two decimals.
pub fn overall_score(scores: &BTreeMap<String, f64>, taxonomy: &CapabilityTaxonomy) -> Result<f64, ReportError> {
    flat_mean(scores, taxonomy).map(round2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub benchmark_id: String,
    pub capability: Capability,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityReport {
    pub model_id: String,
    pub overall: f64,
    /// Mean of member benchmark scores, two decimals.
    pub capabilities: BTreeMap<Capability, f64>,
    /// Taxonomy order.
    pub benchmarks: Vec<BenchmarkEntry>,
}

pub fn capability_scores(
    model_id: &str,
    scores: &BTreeMap<String, f64>,
    taxonomy: &CapabilityTaxonomy,
) -> Result<CapabilityReport, ReportError> {
    let overall = overall_score(scores, taxonomy)?;
    let capabilities = taxonomy
        .capabilities()
        .map(|(cap, members)| {
            let mean = members.iter().map(|b| scores[b]).sum::<f64>() / members.len() as f64;
            (cap.clone(), round2(mean))
        })
        .collect();
    let benchmarks = taxonomy
        .capabilities()
        .flat_map(|(cap, members)| {
            members.iter().map(move |b| BenchmarkEntry {
                benchmark_id: b.clone(),
                capability: cap.clone(),
                score: scores[b],
            })
        })
        .collect();
    Ok(CapabilityReport {
        model_id: model_id.to_string(),
        overall,
        capabilities,
        benchmarks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub report: CapabilityReport,
}

/// Descending overall, model id ascending on ties; ranks are 1-based.
pub fn build_leaderboard(reports: &[CapabilityReport]) -> Vec<LeaderboardRow> {
    let mut sorted: Vec<&CapabilityReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        b.overall
            .total_cmp(&a.overall)
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, r)| LeaderboardRow {
            rank: i + 1,
            report: r.clone(),
        })
        .collect()
}
