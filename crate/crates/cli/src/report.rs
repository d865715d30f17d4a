//! JSON and CSV output for suite reports.

use crate::suite::{SuiteReport, TaskRecord, TraceRecord};
use std::path::{Path, PathBuf};

pub fn to_json(report: &SuiteReport) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize")
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e15)`.
fn number(v: f64) -> String {
    let a = v.abs();
    if v.is_finite() && a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn summary_row(t: &TaskRecord) -> [String; 7] {
    let value = t
        .samples
        .iter()
        .chain(t.traces.iter().flat_map(|tr| &tr.points))
        .map(|s| s.value.0)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    [
        t.index.to_string(),
        t.name.clone(),
        t.op.clone(),
        t.outcome.label().into(),
        t.verdict.clone().unwrap_or_default(),
        value.map(number).unwrap_or_default(),
        t.message.clone().unwrap_or_default(),
    ]
}

/// One row per task: `index, task, op, outcome, verdict, max_value, message`.
pub fn summary_csv(report: &SuiteReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "task", "op", "outcome", "verdict", "max_value", "message"])
        .expect("in-memory write");
    for t in &report.tasks {
        w.write_record(summary_row(t)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Columns `<param>, sup, status`.
pub fn trace_csv(trace: &TraceRecord) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([trace.param.as_str(), "sup", "status"]).expect("in-memory write");
    for p in &trace.points {
        let status = serde_json::to_value(p.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        w.write_record([p.param.map(|v| v.to_string()).unwrap_or_default(), number(p.value.0), status])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Lowercase file-name form of a trace label.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let out = out.trim_matches('-').to_string();
    if out.is_empty() {
        "trace".into()
    } else {
        out
    }
}

/// Writes `report.json`, `summary.csv` and `<task>.<trace>.csv` for every
/// trace into `dir`, creating it if needed. Returns the files written.
pub fn write_outputs(report: &SuiteReport, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> std::io::Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("report.json".into(), to_json(report))?;
    put("summary.csv".into(), summary_csv(report))?;
    for t in &report.tasks {
        for tr in &t.traces {
            put(format!("{}.{}.csv", t.name, slug(&tr.label)), trace_csv(tr))?;
        }
    }
    Ok(written)
}
