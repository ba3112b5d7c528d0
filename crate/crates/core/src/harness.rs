//! Protocol runner: expands a plan into cells, generates each cell's
//! samples, scores them with the baseline method grid, and reduces the
//! per-sample metric outcomes into per-cell result rows. Downstream
//! aggregation (robustness profiles, hyperparameter selection, worst-case
//! views) operates on the rows alone, so externally ingested predictions
//! feed the same pipeline through [`RowAccumulator`].

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{s, Array2, Array3};
use rayon::prelude::*;

use crate::discovery::{cross_correlation_scores, gvar_fit, gvar_scores, ScoreGraph, ScoreMode};
use crate::error::Result;
use crate::generator::{expand_plan, make_sample, resolve_pool, Plan};
use crate::metrics::{self, GraphKind, MetricId};
use crate::scm::GroundTruth;

/// One aggregated cell: mean metric value over the successful attempts.
/// `count + failures` equals the planned sample count for the cell; when
/// `count` is zero the mean is undefined and `value` is written as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub hp: String,
    pub violation: String,
    pub level: u8,
    pub regime_id: String,
    pub graph: GraphKind,
    pub metric: MetricId,
    pub value: f64,
    pub count: u32,
    pub failures: u32,
}

type RowKey = (String, String, String, u8, String, GraphKind, MetricId);

#[derive(Debug, Default, Clone, Copy)]
struct CellAcc {
    sum: f64,
    count: u32,
    failures: u32,
}

/// Single-writer reduction of per-sample outcomes into sorted rows.
/// Values must be recorded in sample order so the mean is a fixed-order
/// floating-point sum, independent of how many workers scored samples.
#[derive(Debug, Default)]
pub struct RowAccumulator {
    cells: BTreeMap<RowKey, CellAcc>,
}

impl RowAccumulator {
    /// Records one attempt; `None` marks a failed attempt.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        method: &str,
        hp: &str,
        violation: &str,
        level: u8,
        regime_id: &str,
        graph: GraphKind,
        metric: MetricId,
        value: Option<f64>,
    ) {
        let key = (
            method.to_owned(),
            hp.to_owned(),
            violation.to_owned(),
            level,
            regime_id.to_owned(),
            graph,
            metric,
        );
        let cell = self.cells.entry(key).or_default();
        match value {
            Some(v) => {
                cell.sum += v;
                cell.count += 1;
            }
            None => cell.failures += 1,
        }
    }

    /// Emits rows sorted by (method, hp, violation, level, regime, graph, metric).
    pub fn into_rows(self) -> Vec<ResultRow> {
        self.cells
            .into_iter()
            .map(|((method, hp, violation, level, regime_id, graph, metric), c)| ResultRow {
                method,
                hp,
                violation,
                level,
                regime_id,
                graph,
                metric,
                value: if c.count > 0 { c.sum / f64::from(c.count) } else { 0.0 },
                count: c.count,
                failures: c.failures,
            })
            .collect()
    }
}

/// Reconciles a model's lag range with the true one by zero-padding the
/// shallower side. Padded score slots predict nothing under the strict
/// edge rule, and padded truth slots add no edges, so a correct model at
/// extra depth keeps its metrics while a too-shallow one takes misses.
pub fn align_lags(scores: &Array3<f64>, truth: &Array3<u8>) -> (Array3<f64>, Array3<u8>) {
    let (d0, d1, ls) = scores.dim();
    let lt = truth.dim().2;
    let l = ls.max(lt);
    let mut s_out = Array3::zeros((d0, d1, l));
    s_out.slice_mut(s![.., .., ..ls]).assign(scores);
    let mut t_out = Array3::zeros((d0, d1, l));
    t_out.slice_mut(s![.., .., ..lt]).assign(truth);
    (s_out, t_out)
}

fn metric_value(metric: MetricId, scores: &[f64], truth: &[bool]) -> Result<f64> {
    match metric {
        MetricId::ShdMinNorm => metrics::shd_min_norm(scores, truth),
        MetricId::Auroc => metrics::auroc(scores, truth),
        MetricId::F1Max => metrics::f1_max(scores, truth),
        MetricId::AccMax => metrics::acc_max(scores, truth),
    }
}

fn flat_scores<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> Vec<f64> {
    a.iter().copied().collect()
}

fn flat_truth<D: ndarray::Dimension>(a: &ndarray::Array<u8, D>) -> Vec<bool> {
    a.iter().map(|&e| e != 0).collect()
}

/// All metrics on all graph kinds the prediction covers. The lag-resolved
/// graph is lag-aligned against the truth first; the summary graph is the
/// per-pair max over the model's own lag range; the instantaneous block
/// is evaluated only when the method emitted one. A metric error (for
/// example an edgeless truth) is returned in place, to be counted as a
/// failed attempt for that row only.
pub fn graph_metrics(
    graph: &ScoreGraph,
    truth: &GroundTruth,
) -> Vec<(GraphKind, MetricId, Result<f64>)> {
    let mut out = Vec::with_capacity(12);
    let (s3, t3) = align_lags(&graph.lagged, &truth.lwcg);
    let scores = flat_scores(&s3);
    let edges = flat_truth(&t3);
    for m in MetricId::ALL {
        out.push((GraphKind::Lwcg, m, metric_value(m, &scores, &edges)));
    }
    if let Some(inst) = &graph.inst {
        let scores = flat_scores(inst);
        let edges = flat_truth(&truth.inst);
        for m in MetricId::ALL {
            out.push((GraphKind::Inst, m, metric_value(m, &scores, &edges)));
        }
    }
    let lsg = metrics::lsg_from_scores(&graph.lagged);
    let scores = flat_scores(&lsg);
    let edges = flat_truth(&truth.lsg);
    for m in MetricId::ALL {
        out.push((GraphKind::Lsg, m, metric_value(m, &scores, &edges)));
    }
    out
}

/// Baseline method grid: cross correlation and the VAR scorer, each run
/// at a set of lag offsets relative to the regime's true depth. Offsets
/// are clamped so the model order never drops below 1.
#[derive(Debug, Clone)]
pub struct BaselineGrid {
    pub lag_offsets: Vec<i64>,
    pub cross_corr: bool,
    pub gvar_modes: Vec<ScoreMode>,
}

impl Default for BaselineGrid {
    fn default() -> Self {
        Self {
            lag_offsets: vec![-2, 0, 2],
            cross_corr: true,
            gvar_modes: vec![ScoreMode::Coef, ScoreMode::Pval],
        }
    }
}

impl BaselineGrid {
    fn model_order(l_true: usize, offset: i64) -> usize {
        (l_true as i64 + offset).max(1) as usize
    }

    /// Number of (method, hp) members `grid_graphs` enumerates per sample.
    pub fn member_count(&self) -> usize {
        self.lag_offsets.len() * (usize::from(self.cross_corr) + self.gvar_modes.len())
    }
}

/// One attempt outcome: a metric value or a failure marker for the row.
#[derive(Debug, Clone)]
struct Outcome {
    method: &'static str,
    hp: String,
    graph: GraphKind,
    metric: MetricId,
    value: Option<f64>,
}

fn push_metrics(
    out: &mut Vec<Outcome>,
    method: &'static str,
    hp: &str,
    graph: &ScoreGraph,
    truth: &GroundTruth,
) {
    for (kind, metric, value) in graph_metrics(graph, truth) {
        match value {
            Ok(v) => out.push(Outcome {
                method,
                hp: hp.to_owned(),
                graph: kind,
                metric,
                value: Some(v),
            }),
            Err(e) => {
                log::warn!("{method}/{hp} {}/{} skipped: {e}", kind.as_str(), metric.as_str());
                out.push(Outcome { method, hp: hp.to_owned(), graph: kind, metric, value: None });
            }
        }
    }
}

/// Failure rows for a whole-method failure. Baselines emit no
/// instantaneous block, so only the lagged and summary rows exist.
fn push_failures(out: &mut Vec<Outcome>, method: &'static str, hp: &str) {
    for kind in [GraphKind::Lwcg, GraphKind::Lsg] {
        for metric in MetricId::ALL {
            out.push(Outcome { method, hp: hp.to_owned(), graph: kind, metric, value: None });
        }
    }
}

/// Every grid member's prediction for one sample, in the grid's fixed
/// enumeration order: per offset, cross correlation first, then the VAR
/// scorer per mode. `None` marks a failed attempt (already logged); the
/// slot stays so row accounting and ensemble stacking see a stable
/// member list.
pub fn grid_graphs(
    x: &Array2<f64>,
    l_true: usize,
    grid: &BaselineGrid,
) -> Vec<(&'static str, String, Option<ScoreGraph>)> {
    let mut out = Vec::new();
    for &offset in &grid.lag_offsets {
        let l_model = BaselineGrid::model_order(l_true, offset);
        let hp_lag = format!("l{offset:+}");
        if grid.cross_corr {
            let graph = cross_correlation_scores(x, l_model)
                .inspect_err(|e| log::warn!("cross_corr/{hp_lag} failed: {e}"))
                .ok();
            out.push((crate::discovery::METHOD_CROSS_CORR, hp_lag.clone(), graph));
        }
        if !grid.gvar_modes.is_empty() {
            // one least-squares fit serves both score modes
            let fit = gvar_fit(x, l_model)
                .inspect_err(|e| log::warn!("gvar/{hp_lag} failed: {e}"))
                .ok();
            for &mode in &grid.gvar_modes {
                let hp = format!("{hp_lag}_{}", mode.as_str());
                let graph = fit.as_ref().map(|f| gvar_scores(f, mode));
                out.push((crate::discovery::METHOD_GVAR, hp, graph));
            }
        }
    }
    out
}

/// Scores one sample with every method/hyperparameter in the grid.
fn score_sample(x: &Array2<f64>, truth: &GroundTruth, l_true: usize, grid: &BaselineGrid) -> Vec<Outcome> {
    let mut out = Vec::new();
    for (method, hp, graph) in grid_graphs(x, l_true, grid) {
        match graph {
            Some(g) => push_metrics(&mut out, method, &hp, &g, truth),
            None => push_failures(&mut out, method, &hp),
        }
    }
    out
}

/// Runs the full protocol: every plan cell is generated, scored with the
/// grid, and reduced to rows. Samples are scored in parallel; outcomes
/// are folded in sample order so reruns are identical bit for bit
/// regardless of worker count. A generation error aborts the run (it is
/// a guarantee failure, not a method failure).
pub fn run_protocol(plan: &Plan, grid: &BaselineGrid) -> Result<Vec<ResultRow>> {
    let cells = expand_plan(plan)?;
    let pool = resolve_pool(plan, &cells)?;
    let mut acc = RowAccumulator::default();
    for cell in &cells {
        let regime_id = cell.regime.id();
        let per_sample: Vec<Result<Vec<Outcome>>> = (0..plan.count)
            .into_par_iter()
            .map(|index| {
                let sample = make_sample(plan.seed, &cell.configs, &cell.regime, index, pool.as_ref())?;
                Ok(score_sample(&sample.x, &sample.truth, cell.regime.l, grid))
            })
            .collect();
        for outcomes in per_sample {
            for o in outcomes? {
                acc.record(o.method, &o.hp, &cell.label, cell.level, &regime_id, o.graph, o.metric, o.value);
            }
        }
    }
    Ok(acc.into_rows())
}

/// Mean and spread of one (method, hp, violation, graph, metric) key over
/// its level x regime cells. `partial` marks keys where some cells had no
/// successful attempt (or were missing outright), so the mean covers
/// fewer cells than the violation's full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessProfile {
    pub method: String,
    pub hp: String,
    pub violation: String,
    pub graph: GraphKind,
    pub metric: MetricId,
    pub mean: f64,
    pub std: f64,
    pub cells: u32,
    pub partial: bool,
}

/// Unweighted mean over cells: every (level, regime) cell counts once,
/// regardless of how many samples succeeded inside it. Cells with zero
/// successes are excluded from the mean and flagged via `partial`.
pub fn aggregate_robustness(rows: &[ResultRow]) -> Vec<RobustnessProfile> {
    let mut expected: BTreeMap<&str, BTreeSet<(u8, &str)>> = BTreeMap::new();
    for r in rows {
        expected.entry(&r.violation).or_default().insert((r.level, &r.regime_id));
    }
    let mut groups: BTreeMap<(&str, &str, &str, GraphKind, MetricId), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let vals = groups
            .entry((&r.method, &r.hp, &r.violation, r.graph, r.metric))
            .or_default();
        if r.count > 0 {
            vals.push(r.value);
        }
    }
    groups
        .into_iter()
        .map(|((method, hp, violation, graph, metric), vals)| {
            let full = expected[violation].len();
            let n = vals.len();
            let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { 0.0 };
            let var = if n > 0 {
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
            } else {
                0.0
            };
            RobustnessProfile {
                method: method.to_owned(),
                hp: hp.to_owned(),
                violation: violation.to_owned(),
                graph,
                metric,
                mean,
                std: var.sqrt(),
                cells: n as u32,
                partial: n < full,
            }
        })
        .collect()
}

/// Picks, per method, the hyperparameter whose mean lag-resolved
/// normalized SHD across all violations is smallest; ties go to the
/// lexicographically smallest hp id. Argmin is invariant under any
/// strictly increasing transform applied uniformly to the profile means.
pub fn select_best_hp(profiles: &[RobustnessProfile]) -> BTreeMap<String, String> {
    let mut sums: BTreeMap<(&str, &str), (f64, u32)> = BTreeMap::new();
    for p in profiles {
        if p.graph == GraphKind::Lwcg && p.metric == MetricId::ShdMinNorm {
            let e = sums.entry((&p.method, &p.hp)).or_insert((0.0, 0));
            e.0 += p.mean;
            e.1 += 1;
        }
    }
    let mut best: BTreeMap<String, (f64, String)> = BTreeMap::new();
    // hp ids arrive in ascending order, so a strict improvement test
    // leaves the lexicographically smallest winner in place on ties
    for ((method, hp), (sum, n)) in sums {
        let avg = sum / f64::from(n);
        match best.get_mut(method) {
            Some(cur) if avg >= cur.0 => {}
            Some(cur) => *cur = (avg, hp.to_owned()),
            None => {
                best.insert(method.to_owned(), (avg, hp.to_owned()));
            }
        }
    }
    best.into_iter().map(|(m, (_, hp))| (m, hp)).collect()
}

/// Alternate selector: the per-violation argmin instead of the global
/// one, keyed (method, violation).
pub fn select_best_hp_per_violation(
    profiles: &[RobustnessProfile],
) -> BTreeMap<(String, String), String> {
    let mut best: BTreeMap<(String, String), (f64, String)> = BTreeMap::new();
    for p in profiles {
        if p.graph != GraphKind::Lwcg || p.metric != MetricId::ShdMinNorm {
            continue;
        }
        let key = (p.method.clone(), p.violation.clone());
        match best.get_mut(&key) {
            Some(cur) if p.mean > cur.0 || (p.mean == cur.0 && p.hp >= cur.1) => {}
            Some(cur) => *cur = (p.mean, p.hp.clone()),
            None => {
                best.insert(key, (p.mean, p.hp.clone()));
            }
        }
    }
    best.into_iter().map(|(k, (_, hp))| (k, hp)).collect()
}

/// Worst cell per key: the max over level x regime cells with at least
/// one successful attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseRow {
    pub method: String,
    pub hp: String,
    pub violation: String,
    pub graph: GraphKind,
    pub metric: MetricId,
    pub value: f64,
}

pub fn worst_case(rows: &[ResultRow]) -> Vec<WorstCaseRow> {
    let mut max: BTreeMap<(&str, &str, &str, GraphKind, MetricId), f64> = BTreeMap::new();
    for r in rows {
        if r.count == 0 {
            continue;
        }
        max.entry((&r.method, &r.hp, &r.violation, r.graph, r.metric))
            .and_modify(|m| *m = m.max(r.value))
            .or_insert(r.value);
    }
    max.into_iter()
        .map(|((method, hp, violation, graph, metric), value)| WorstCaseRow {
            method: method.to_owned(),
            hp: hp.to_owned(),
            violation: violation.to_owned(),
            graph,
            metric,
            value,
        })
        .collect()
}
