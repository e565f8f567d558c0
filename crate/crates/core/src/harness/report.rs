use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::{RunMetrics, METRICS_SCHEMA_VERSION};

use super::HarnessError;

/// One table row: a configuration and its headline numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub tasks: usize,
    pub sr: f64,
    pub avg_turns: f64,
    pub action: u64,
    pub reflection: u64,
    pub summarization: u64,
    pub critique: u64,
}

impl ReportRow {
    pub fn from_metrics(label: impl Into<String>, m: &RunMetrics) -> Self {
        Self {
            label: label.into(),
            tasks: m.tasks.len(),
            sr: m.sr,
            avg_turns: m.avg_turns,
            action: m.llm_calls.action,
            reflection: m.llm_calls.reflection,
            summarization: m.llm_calls.summarization,
            critique: m.llm_calls.critique,
        }
    }
}

/// Reads a metrics file, refusing other schema versions.
pub fn load_metrics(path: &Path) -> Result<RunMetrics, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| HarnessError::Report {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let found = value.get("schema_version").and_then(serde_json::Value::as_u64);
    if found != Some(u64::from(METRICS_SCHEMA_VERSION)) {
        return Err(HarnessError::Schema {
            path: path.display().to_string(),
            found,
            expected: METRICS_SCHEMA_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| HarnessError::Report {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn render_markdown(first_column: &str, rows: &[ReportRow]) -> String {
    let mut out = format!(
        "| {first_column} | Tasks | SR (%) | Avg turns | Action calls | Reflection calls | Summarization calls | Critique calls |\n\
         |---|---:|---:|---:|---:|---:|---:|---:|\n"
    );
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {:.1} | {:.2} | {} | {} | {} | {} |\n",
            r.label.replace('|', "\\|"),
            r.tasks,
            r.sr,
            r.avg_turns,
            r.action,
            r.reflection,
            r.summarization,
            r.critique
        ));
    }
    out
}

pub fn render_csv(rows: &[ReportRow]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::csv(&e))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Report {
        path: "<csv>".into(),
        reason: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, HarnessError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()
        .map_err(|e| HarnessError::csv(&e))
}

/// Markdown and CSV tables over metrics files, one row per file in the
/// order given.
pub fn report(paths: &[impl AsRef<Path>]) -> Result<(String, String), HarnessError> {
    if paths.is_empty() {
        return Err(HarnessError::Usage("report needs at least one metrics file".into()));
    }
    let mut rows = Vec::new();
    for p in paths {
        let m = load_metrics(p.as_ref())?;
        rows.push(ReportRow::from_metrics(m.label.clone(), &m));
    }
    Ok((render_markdown("Configuration", &rows), render_csv(&rows)?))
}
