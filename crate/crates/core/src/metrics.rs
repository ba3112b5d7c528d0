//! Threshold-agnostic graph-recovery metrics. All four metrics sweep the
//! set of distinct score values plus an all-reject sentinel; the edge rule
//! is strict (score > threshold). Inputs are flattened slot arrays so the
//! same code serves lag-resolved, instantaneous, and summary graphs.

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricId {
    ShdMinNorm,
    Auroc,
    F1Max,
    AccMax,
}

impl MetricId {
    pub const ALL: [MetricId; 4] =
        [MetricId::ShdMinNorm, MetricId::Auroc, MetricId::F1Max, MetricId::AccMax];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::ShdMinNorm => "shd_min_norm",
            MetricId::Auroc => "auroc",
            MetricId::F1Max => "f1_max",
            MetricId::AccMax => "acc_max",
        }
    }

    /// True when smaller values mean better recovery.
    pub fn lower_is_better(self) -> bool {
        matches!(self, MetricId::ShdMinNorm)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphKind {
    Lwcg,
    Inst,
    Lsg,
}

impl GraphKind {
    pub const ALL: [GraphKind; 3] = [GraphKind::Lwcg, GraphKind::Inst, GraphKind::Lsg];

    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Lwcg => "lwcg",
            GraphKind::Inst => "inst",
            GraphKind::Lsg => "lsg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricResult {
    pub metric: MetricId,
    pub graph: GraphKind,
    pub value: f64,
    pub sample: usize,
}

fn check_slots(scores: &[f64], truth: &[bool]) -> Result<()> {
    if scores.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores against {} truth slots",
            scores.len(),
            truth.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no slots to score".into()));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    Ok(())
}

/// Slot order sorted by descending score, grouped into runs of equal value.
/// Walking the runs front-to-back replays every threshold in the distinct
/// value set: after consuming k runs, the prediction equals `score > v_k`.
fn descending_runs(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match runs.last_mut() {
            Some(run) if scores[run[0]] == scores[idx] => run.push(idx),
            _ => runs.push(vec![idx]),
        }
    }
    runs
}

/// Minimum over thresholds of the Hamming distance to the truth, divided by
/// the number of true edges. Errors when the truth has no edges.
pub fn shd_min_norm(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_slots(scores, truth)?;
    let edges = truth.iter().filter(|&&e| e).count();
    if edges == 0 {
        return Err(Error::ZeroTrueEdges);
    }
    // all-reject sentinel: every true edge is a miss
    let mut mismatches = edges;
    let mut best = mismatches;
    let runs = descending_runs(scores);
    let m = runs.len();
    for (k, run) in runs.into_iter().enumerate() {
        for idx in run {
            if truth[idx] {
                mismatches -= 1;
            } else {
                mismatches += 1;
            }
        }
        // consuming the last run would predict everything, which no
        // threshold in the sweep set reaches under the strict edge rule
        if k + 1 < m {
            best = best.min(mismatches);
        }
    }
    Ok(best as f64 / edges as f64)
}

/// Probability that a random true edge outscores a random non-edge, ties
/// counted one half (Mann-Whitney form).
pub fn auroc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_slots(scores, truth)?;
    let pos = truth.iter().filter(|&&e| e).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassTruth);
    }
    let mut u = 0.0f64;
    let mut below = 0usize; // negatives with strictly smaller score
    for run in descending_runs(scores).into_iter().rev() {
        let run_pos = run.iter().filter(|&&i| truth[i]).count();
        let run_neg = run.len() - run_pos;
        u += run_pos as f64 * (below as f64 + run_neg as f64 / 2.0);
        below += run_neg;
    }
    Ok(u / (pos as f64 * neg as f64))
}

/// Maximum F1 over the threshold sweep, edges as positives.
pub fn f1_max(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_slots(scores, truth)?;
    let edges = truth.iter().filter(|&&e| e).count();
    if edges == 0 {
        return Err(Error::ZeroTrueEdges);
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut best = 0.0f64; // all-reject sentinel scores F1 = 0
    let runs = descending_runs(scores);
    let m = runs.len();
    for (k, run) in runs.into_iter().enumerate() {
        for idx in run {
            if truth[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        if k + 1 < m {
            let f1 = 2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + (edges - tp) as f64);
            best = best.max(f1);
        }
    }
    Ok(best)
}

/// Maximum accuracy over the threshold sweep; defined for any truth.
pub fn acc_max(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_slots(scores, truth)?;
    let n = truth.len();
    let edges = truth.iter().filter(|&&e| e).count();
    let mut mismatches = edges;
    let mut best = n - mismatches;
    let runs = descending_runs(scores);
    let m = runs.len();
    for (k, run) in runs.into_iter().enumerate() {
        for idx in run {
            if truth[idx] {
                mismatches -= 1;
            } else {
                mismatches += 1;
            }
        }
        if k + 1 < m {
            best = best.max(n - mismatches);
        }
    }
    Ok(best as f64 / n as f64)
}

/// Lag-collapsed scores: entrywise maximum over the lag axis.
pub fn lsg_from_scores(lagged: &Array3<f64>) -> Array2<f64> {
    if lagged.dim().2 == 0 {
        return Array2::zeros((lagged.dim().0, lagged.dim().1));
    }
    lagged.map_axis(Axis(2), |lags| lags.fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
}
