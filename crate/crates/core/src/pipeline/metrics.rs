//! CSV and JSON-lines output of slice reports.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde_json::json;

use super::SliceReport;
use crate::verifier::Search;

pub const CSV_HEADER: [&str; 13] = [
    "File",
    "SliceNo",
    "Slicer",
    "Optimizations",
    "Search",
    "Safe",
    "InitLocs",
    "InitEdges",
    "ArgSize",
    "EndLocs",
    "EndEdges",
    "OptimizationTimeMs",
    "VerificationTimeMs",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MetricsFormat {
    #[default]
    Csv,
    Jsonl,
}

impl fmt::Display for MetricsFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricsFormat::Csv => "csv",
            MetricsFormat::Jsonl => "jsonl",
        })
    }
}

impl FromStr for MetricsFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<MetricsFormat, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MetricsFormat::Csv),
            "jsonl" => Ok(MetricsFormat::Jsonl),
            _ => Err(format!("unknown format `{s}` (expected csv or jsonl)")),
        }
    }
}

fn search_name(s: Search) -> &'static str {
    match s {
        Search::Bfs => "BFS",
        Search::Dfs => "DFS",
    }
}

fn csv_row(r: &SliceReport) -> [String; 13] {
    [
        r.slice_id(),
        r.slice_no.map(|n| n.to_string()).unwrap_or_default(),
        r.slicer.to_string(),
        r.optimizations.to_string(),
        search_name(r.search).to_string(),
        r.safe.to_string(),
        r.init_locs.to_string(),
        r.init_edges.to_string(),
        r.arg_size.to_string(),
        r.end_locs.to_string(),
        r.end_edges.to_string(),
        r.optimization_time_ms.to_string(),
        r.verification_time_ms.to_string(),
    ]
}

fn json_row(r: &SliceReport) -> serde_json::Value {
    json!({
        "file": r.slice_id(),
        "slice_no": r.slice_no,
        "slicer": r.slicer.to_string(),
        "optimizations": r.optimizations,
        "search": search_name(r.search),
        "safe": r.safe.to_string(),
        "init_locs": r.init_locs,
        "init_edges": r.init_edges,
        "arg_size": r.arg_size,
        "arg_total": r.arg_total,
        "end_locs": r.end_locs,
        "end_edges": r.end_edges,
        "optimization_time_ms": r.optimization_time_ms as u64,
        "verification_time_ms": r.verification_time_ms as u64,
        "slice_refinements": r.slice_refinements,
        "cegar_iterations": r.cegar_iterations,
        "reason": r.reason,
    })
}

pub fn write_metrics(reports: &[SliceReport], format: MetricsFormat, out: impl Write) -> std::io::Result<()> {
    match format {
        MetricsFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in reports {
                w.write_record(csv_row(r))?;
            }
            w.flush()
        }
        MetricsFormat::Jsonl => {
            let mut out = out;
            for r in reports {
                serde_json::to_writer(&mut out, &json_row(r))?;
                out.write_all(b"\n")?;
            }
            out.flush()
        }
    }
}

pub fn emit_metrics(reports: &[SliceReport], format: MetricsFormat) -> Vec<u8> {
    let mut buf = Vec::new();
    write_metrics(reports, format, &mut buf).expect("writing to memory");
    buf
}
