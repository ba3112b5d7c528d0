//! Results CSV: the harness row schema, one line per unique key, UTF-8,
//! `.` decimal. Floats are written in shortest round-trip form and rows
//! are sorted by key, so equal row sets serialize to identical bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::ResultRow;
use crate::metrics::{GraphKind, MetricId};

pub const RESULTS_HEADER: &str =
    "method,hp_id,violation,level,regime_id,graph,metric,value,count,failures";

fn row_key(r: &ResultRow) -> (&str, &str, &str, u8, &str, GraphKind, MetricId) {
    (&r.method, &r.hp, &r.violation, r.level, &r.regime_id, r.graph, r.metric)
}

pub fn format_results(rows: &[ResultRow]) -> String {
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| row_key(a).cmp(&row_key(b)));
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.hp,
            r.violation,
            r.level,
            r.regime_id,
            r.graph.as_str(),
            r.metric.as_str(),
            r.value,
            r.count,
            r.failures
        ));
    }
    out
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    fs::write(path, format_results(rows))?;
    Ok(())
}

fn format_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: format!("line {line}: {}", reason.into()),
    }
}

pub fn parse_results(path: &Path, text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, head)) if head == RESULTS_HEADER => {}
        Some((_, head)) => {
            return Err(format_err(path, 1, format!("unexpected header `{head}`")));
        }
        None => return Err(format_err(path, 1, "empty file")),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let n = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [method, hp, violation, level, regime_id, graph, metric, value, count, failures] =
            fields[..]
        else {
            return Err(format_err(path, n, format!("{} fields, expected 10", fields.len())));
        };
        let graph = GraphKind::parse(graph)
            .ok_or_else(|| format_err(path, n, format!("unknown graph kind `{graph}`")))?;
        let metric = MetricId::parse(metric)
            .ok_or_else(|| format_err(path, n, format!("unknown metric `{metric}`")))?;
        let level: u8 =
            level.parse().map_err(|_| format_err(path, n, format!("bad level `{level}`")))?;
        let value: f64 =
            value.parse().map_err(|_| format_err(path, n, format!("bad value `{value}`")))?;
        if !value.is_finite() {
            return Err(format_err(path, n, format!("non-finite value `{value}`")));
        }
        let count: u32 =
            count.parse().map_err(|_| format_err(path, n, format!("bad count `{count}`")))?;
        let failures: u32 = failures
            .parse()
            .map_err(|_| format_err(path, n, format!("bad failures `{failures}`")))?;
        rows.push(ResultRow {
            method: method.to_owned(),
            hp: hp.to_owned(),
            violation: violation.to_owned(),
            level,
            regime_id: regime_id.to_owned(),
            graph,
            metric,
            value,
            count,
            failures,
        });
    }
    Ok(rows)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path)?;
    parse_results(path, &text)
}
