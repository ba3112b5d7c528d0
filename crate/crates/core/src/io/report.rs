//! Report emission: per-violation rank tables in the results schema plus
//! a rank column, and dependency-free SVG line charts of metric-vs-level
//! curves per method. Everything is deterministic: sorted keys, fixed
//! float formatting, no timestamps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{aggregate_robustness, ResultRow};
use crate::metrics::{GraphKind, MetricId};

pub const RANK_HEADER: &str =
    "method,hp_id,violation,level,regime_id,graph,metric,value,count,failures,rank";

/// One aggregated line of the rank table: the robustness-profile mean for
/// a (method, hp) under one violation/graph/metric, its total attempt
/// counts, and its rank among competitors (1 = best; ties share the rank,
/// the following rank is skipped).
#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub method: String,
    pub hp: String,
    pub violation: String,
    pub graph: GraphKind,
    pub metric: MetricId,
    pub value: f64,
    pub count: u32,
    pub failures: u32,
    pub rank: u32,
}

/// Builds the rank table from raw result rows: profile means over all
/// level x regime cells, ranked within each (violation, graph, metric)
/// by the metric's own orientation.
pub fn rank_table(rows: &[ResultRow]) -> Result<Vec<RankRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no result rows to rank".into()));
    }
    let mut attempts: BTreeMap<(&str, &str, &str, GraphKind, MetricId), (u32, u32)> =
        BTreeMap::new();
    for r in rows {
        let e = attempts.entry((&r.method, &r.hp, &r.violation, r.graph, r.metric)).or_default();
        e.0 += r.count;
        e.1 += r.failures;
    }
    let profiles = aggregate_robustness(rows);
    let mut out: Vec<RankRow> = profiles
        .iter()
        .map(|p| {
            let (count, failures) = attempts
                [&(p.method.as_str(), p.hp.as_str(), p.violation.as_str(), p.graph, p.metric)];
            RankRow {
                method: p.method.clone(),
                hp: p.hp.clone(),
                violation: p.violation.clone(),
                graph: p.graph,
                metric: p.metric,
                value: p.mean,
                count,
                failures,
                rank: 0,
            }
        })
        .collect();
    // competition ranking within each (violation, graph, metric) group
    let mut by_group: BTreeMap<(String, GraphKind, MetricId), Vec<usize>> = BTreeMap::new();
    for (idx, row) in out.iter().enumerate() {
        by_group.entry((row.violation.clone(), row.graph, row.metric)).or_default().push(idx);
    }
    for ((_, _, metric), mut members) in by_group {
        members.sort_by(|&a, &b| {
            let (va, vb) = (out[a].value, out[b].value);
            if metric.lower_is_better() { va.total_cmp(&vb) } else { vb.total_cmp(&va) }
        });
        let mut last = f64::NAN;
        let mut last_rank = 0;
        for (pos, &idx) in members.iter().enumerate() {
            if out[idx].value != last {
                last = out[idx].value;
                last_rank = pos as u32 + 1;
            }
            out[idx].rank = last_rank;
        }
    }
    Ok(out)
}

pub fn format_rank_csv(rows: &[RankRow]) -> String {
    let mut sorted: Vec<&RankRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.violation, a.graph, a.metric, a.rank, &a.method, &a.hp)
            .cmp(&(&b.violation, b.graph, b.metric, b.rank, &b.method, &b.hp))
    });
    let mut out = String::new();
    out.push_str(RANK_HEADER);
    out.push('\n');
    for r in sorted {
        let _ = writeln!(
            out,
            "{},{},{},all,all,{},{},{},{},{},{}",
            r.method,
            r.hp,
            r.violation,
            r.graph.as_str(),
            r.metric.as_str(),
            r.value,
            r.count,
            r.failures,
            r.rank
        );
    }
    out
}

pub fn write_rank_csv(path: &Path, rows: &[RankRow]) -> Result<()> {
    fs::write(path, format_rank_csv(rows))?;
    Ok(())
}

const PALETTE: [&str; 10] = [
    "#2563eb", "#dc2626", "#16a34a", "#9333ea", "#ea580c", "#0891b2", "#be185d", "#65a30d",
    "#7c3aed", "#b45309",
];

const CHART_W: f64 = 720.0;
const CHART_H: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 190.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

/// Per-method metric-vs-level curves for one violation and graph kind.
/// Each point is the unweighted mean over that level's regime cells with
/// at least one successful attempt. Errors when nothing matches.
pub fn level_curves_svg(
    rows: &[ResultRow],
    violation: &str,
    graph: GraphKind,
    metric: MetricId,
) -> Result<String> {
    // (method, hp) -> level -> (sum over regime cells, cell count)
    let mut series: BTreeMap<(String, String), BTreeMap<u8, (f64, u32)>> = BTreeMap::new();
    let mut levels: BTreeSet<u8> = BTreeSet::new();
    for r in rows {
        if r.violation != violation || r.graph != graph || r.metric != metric || r.count == 0 {
            continue;
        }
        levels.insert(r.level);
        let cell = series
            .entry((r.method.clone(), r.hp.clone()))
            .or_default()
            .entry(r.level)
            .or_insert((0.0, 0));
        cell.0 += r.value;
        cell.1 += 1;
    }
    if series.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no rows for violation `{violation}` on {}/{}",
            graph.as_str(),
            metric.as_str()
        )));
    }
    let points: BTreeMap<(String, String), Vec<(u8, f64)>> = series
        .into_iter()
        .map(|(key, per_level)| {
            let pts =
                per_level.into_iter().map(|(lvl, (sum, n))| (lvl, sum / f64::from(n))).collect();
            (key, pts)
        })
        .collect();

    let (lo_level, hi_level) = (
        f64::from(*levels.first().expect("nonempty")),
        f64::from(*levels.last().expect("nonempty")),
    );
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for pts in points.values() {
        for &(_, v) in pts {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let pad = if hi > lo { (hi - lo) * 0.08 } else { 0.05 };
    let (y_lo, y_hi) = (lo - pad, hi + pad);

    let plot_w = CHART_W - MARGIN_L - MARGIN_R;
    let plot_h = CHART_H - MARGIN_T - MARGIN_B;
    let x_of = |level: f64| {
        if hi_level > lo_level {
            MARGIN_L + (level - lo_level) / (hi_level - lo_level) * plot_w
        } else {
            MARGIN_L + plot_w / 2.0
        }
    };
    let y_of = |v: f64| MARGIN_T + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {CHART_W} {CHART_H}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{CHART_W}\" height=\"{CHART_H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"22\" font-size=\"15\">{} by level: {} ({})</text>",
        MARGIN_L,
        metric.as_str(),
        violation,
        graph.as_str()
    );
    // axes
    let x0 = MARGIN_L;
    let x1 = CHART_W - MARGIN_R;
    let y0 = MARGIN_T + plot_h;
    let _ = writeln!(
        svg,
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" stroke=\"#444\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{x0:.2}\" y1=\"{MARGIN_T:.2}\" x2=\"{x0:.2}\" y2=\"{y0:.2}\" stroke=\"#444\"/>"
    );
    for &lvl in &levels {
        let x = x_of(f64::from(lvl));
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#444\"/>",
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{lvl}</text>",
            y0 + 20.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">level</text>",
        (x0 + x1) / 2.0,
        y0 + 38.0
    );
    for k in 0..=4 {
        let v = y_lo + (y_hi - y_lo) * f64::from(k) / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x0:.2}\" y2=\"{y:.2}\" stroke=\"#444\"/>",
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.3}</text>",
            x0 - 8.0,
            y + 4.0
        );
    }
    // one polyline + legend entry per (method, hp)
    for (k, ((method, hp), pts)) in points.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(lvl, v)| format!("{:.2},{:.2}", x_of(f64::from(lvl)), y_of(v)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            path.join(" ")
        );
        for &(lvl, v) in pts {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                x_of(f64::from(lvl)),
                y_of(v)
            );
        }
        let ly = MARGIN_T + 14.0 * k as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>",
            x1 + 10.0,
            ly,
            x1 + 28.0,
            ly
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\">{method}/{hp}</text>",
            x1 + 34.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
