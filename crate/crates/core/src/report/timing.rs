use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ReportError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTiming {
    pub benchmark_id: String,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub benchmark_id: String,
    pub seconds: f64,
    pub duration: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub benchmarks: Vec<TimingRow>,
    pub total_seconds: f64,
    pub total: String,
}

/// `H:MM:SS`, whole seconds truncated.
pub fn format_hms(seconds: f64) -> String {
    let s = seconds.max(0.0) as u64;
    format!("{}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60)
}

pub fn timing_summary(log: &[BenchmarkTiming]) -> Result<TimingSummary, ReportError> {
    let mut rows = Vec::with_capacity(log.len());
    let mut total_ms = 0i64;
    for t in log {
        let ms = (t.finished - t.started).num_milliseconds();
        if ms < 0 {
            return Err(ReportError::Timing(t.benchmark_id.clone()));
        }
        total_ms += ms;
        let seconds = ms as f64 / 1000.0;
        rows.push(TimingRow {
            benchmark_id: t.benchmark_id.clone(),
            seconds,
            duration: format_hms(seconds),
        });
    }
    let total_seconds = total_ms as f64 / 1000.0;
    Ok(TimingSummary {
        benchmarks: rows,
        total_seconds,
        total: format_hms(total_seconds),
    })
}
