use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::json;

use super::{build_leaderboard, CapabilityReport, LeaderboardRow, ReportError};
use crate::domain::Capability;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
    RadarJson,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            "radar_json" | "radar" => Ok(Self::RadarJson),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

/// Benchmark columns in first-appearance order across reports.
fn columns(rows: &[LeaderboardRow]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for r in rows {
        for b in &r.report.benchmarks {
            if !cols.contains(&b.benchmark_id) {
                cols.push(b.benchmark_id.clone());
            }
        }
    }
    cols
}

fn score_of(r: &CapabilityReport, benchmark: &str) -> Option<f64> {
    r.benchmarks
        .iter()
        .find(|b| b.benchmark_id == benchmark)
        .map(|b| b.score)
}

/// Six fixed axes; capabilities a report lacks are `null`.
pub fn radar_json(reports: &[CapabilityReport]) -> serde_json::Value {
    let models: BTreeMap<&str, Vec<Option<f64>>> = reports
        .iter()
        .map(|r| {
            let axis = Capability::ALL
                .iter()
                .map(|c| r.capabilities.get(c).copied())
                .collect();
            (r.model_id.as_str(), axis)
        })
        .collect();
    json!({
        "axes": Capability::ALL.iter().map(Capability::as_str).collect::<Vec<_>>(),
        "statistic": "mean of member benchmark scores",
        "models": models,
    })
}

/// Renders a leaderboard over `reports`. Output bytes depend only on the
/// reports, not on their input order.
pub fn emit_report(reports: &[CapabilityReport], format: ReportFormat) -> Vec<u8> {
    let rows = build_leaderboard(reports);
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(&rows).expect("report serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::RadarJson => {
            let mut out = serde_json::to_vec_pretty(&radar_json(reports)).expect("radar serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => {
            let cols = columns(&rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["model_id".to_string(), "overall".to_string()];
            header.extend(cols.iter().cloned());
            w.write_record(&header).expect("in-memory write");
            for r in &rows {
                let mut rec = vec![r.report.model_id.clone(), format!("{:.2}", r.report.overall)];
                rec.extend(
                    cols.iter()
                        .map(|c| score_of(&r.report, c).map_or(String::new(), |s| format!("{s:.2}"))),
                );
                w.write_record(&rec).expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
        ReportFormat::Markdown => {
            let cols = columns(&rows);
            let mut s = String::from("| Rank | Model | Avg |");
            for c in &cols {
                let _ = write!(s, " {c} |");
            }
            s.push_str("\n|---:|---|---:|");
            s.push_str(&"---:|".repeat(cols.len()));
            s.push('\n');
            for r in &rows {
                let _ = write!(s, "| {} | {} | {:.2} |", r.rank, r.report.model_id, r.report.overall);
                for c in &cols {
                    match score_of(&r.report, c) {
                        Some(v) => {
                            let _ = write!(s, " {v:.2} |");
                        }
                        None => s.push_str(" - |"),
                    }
                }
                s.push('\n');
            }
            s.into_bytes()
        }
    }
}
