//! Score-graph combiners: unweighted averaging, a ridge-trained linear
//! meta-learner with slot-shared weights, and the per-violation oracle.
//! Combiners see only predicted graphs, never the series itself.

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::{Array2, Array3};

use crate::discovery::ScoreGraph;
use crate::error::{Error, Result};
use crate::harness::{align_lags, RobustnessProfile};
use crate::metrics::{GraphKind, MetricId};
use crate::scm::GroundTruth;

pub const METHOD_ENSEMBLE_AVG: &str = "ensemble_avg";
pub const METHOD_ENSEMBLE_LINEAR: &str = "ensemble_linear";
pub const METHOD_PARETO_ORACLE: &str = "pareto_oracle";

/// Identifier recorded in trained models: one affine rescale per sample
/// and method over every slot the prediction carries.
pub const NORMALIZATION_MINMAX: &str = "minmax_per_sample";

/// Min-max rescale of one prediction to [0, 1], jointly over the lagged
/// block and the instantaneous block so within-prediction ordering is
/// kept. A constant prediction carries no ranking signal and maps to
/// all zeros.
pub fn minmax_normalize(graph: &ScoreGraph) -> ScoreGraph {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut scan = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    graph.lagged.iter().for_each(|&v| scan(v));
    if let Some(b) = &graph.inst {
        b.iter().for_each(|&v| scan(v));
    }
    let span = hi - lo;
    let map = move |v: f64| if span > 0.0 { (v - lo) / span } else { 0.0 };
    ScoreGraph {
        lagged: graph.lagged.mapv(map),
        inst: graph.inst.as_ref().map(|b| b.mapv(map)),
        method: graph.method.clone(),
        hp: graph.hp.clone(),
        sample: graph.sample,
    }
}

/// Members must agree on the variable square and on whether they score
/// instantaneous edges; lag depths may differ (deeper model orders see
/// more slabs) and are zero-padded to the deepest member on use.
fn check_stack(graphs: &[ScoreGraph]) -> Result<()> {
    let Some(first) = graphs.first() else {
        return Err(Error::InvalidArgument("ensemble needs at least one graph".into()));
    };
    for g in graphs {
        let (d0, d1, _) = g.lagged.dim();
        let (f0, f1, _) = first.lagged.dim();
        if (d0, d1) != (f0, f1) {
            return Err(Error::ShapeMismatch(format!(
                "lagged {:?} vs {:?} in ensemble stack",
                g.lagged.dim(),
                first.lagged.dim()
            )));
        }
        if g.inst.is_some() != first.inst.is_some() {
            return Err(Error::ShapeMismatch(
                "mixed instantaneous-block presence in ensemble stack".into(),
            ));
        }
    }
    Ok(())
}

fn pad_depth(a: &Array3<f64>, depth: usize) -> Array3<f64> {
    let (d0, d1, l) = a.dim();
    if l == depth {
        return a.clone();
    }
    let mut out = Array3::<f64>::zeros((d0, d1, depth));
    out.slice_mut(ndarray::s![.., .., ..l]).assign(a);
    out
}

fn deepest_lag(graphs: &[ScoreGraph]) -> usize {
    graphs.iter().map(|g| g.lagged.dim().2).max().unwrap_or(0)
}

/// Entrywise mean of two or more predictions over the same variables;
/// shallower lag blocks count as zero at the slabs they do not score.
/// Inputs are expected to be normalized per sample already (see
/// [`minmax_normalize`]); the mean itself adds no rescaling, so
/// identical inputs pass through unchanged.
pub fn ensemble_average(graphs: &[ScoreGraph]) -> Result<ScoreGraph> {
    if graphs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "ensemble average needs >= 2 graphs, got {}",
            graphs.len()
        )));
    }
    check_stack(graphs)?;
    let scale = 1.0 / graphs.len() as f64;
    let (d0, d1, _) = graphs[0].lagged.dim();
    let mut lagged = Array3::<f64>::zeros((d0, d1, deepest_lag(graphs)));
    for g in graphs {
        let (.., l) = g.lagged.dim();
        let mut head = lagged.slice_mut(ndarray::s![.., .., ..l]);
        head += &g.lagged;
    }
    lagged.mapv_inplace(|v| v * scale);
    let inst = graphs[0].inst.as_ref().map(|first| {
        let mut acc = Array2::<f64>::zeros(first.dim());
        for g in graphs {
            acc += g.inst.as_ref().expect("stack checked uniform");
        }
        acc.mapv_inplace(|v| v * scale);
        acc
    });
    Ok(ScoreGraph {
        lagged,
        inst,
        method: METHOD_ENSEMBLE_AVG.into(),
        hp: format!("m{}", graphs.len()),
        sample: graphs[0].sample,
    })
}

/// Slot-shared linear combiner: one weight per base method plus a bias,
/// so the same model applies at any D and model depth.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEnsembleModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub seed: u64,
    pub normalization: String,
}

/// Per-slot design rows for one training sample: every method's
/// normalized score at the slot, plus the binary edge label. Lagged
/// blocks are zero-padded to a common depth first so slot k means the
/// same thing in every column.
fn stacked_slots(
    graphs: &[ScoreGraph],
    truth: &GroundTruth,
    rows: &mut Vec<(Vec<f64>, f64)>,
) -> Result<()> {
    check_stack(graphs)?;
    let d = truth.lwcg.dim().0;
    for g in graphs {
        if g.lagged.dim().0 != d {
            return Err(Error::ShapeMismatch(format!(
                "prediction over {} variables against truth over {d}",
                g.lagged.dim().0
            )));
        }
    }
    let deepest = graphs
        .iter()
        .map(|g| g.lagged.dim().2)
        .max()
        .unwrap_or(0)
        .max(truth.lwcg.dim().2);
    let mut pad = Array3::<u8>::zeros((d, d, deepest));
    pad.slice_mut(ndarray::s![.., .., ..truth.lwcg.dim().2]).assign(&truth.lwcg);
    let normalized: Vec<ScoreGraph> = graphs.iter().map(minmax_normalize).collect();
    let aligned: Vec<Array3<f64>> =
        normalized.iter().map(|g| align_lags(&g.lagged, &pad).0).collect();
    let slots = d * d * deepest;
    for k in 0..slots {
        let features: Vec<f64> = aligned.iter().map(|a| a.as_slice().unwrap()[k]).collect();
        let label = f64::from(pad.as_slice().unwrap()[k]);
        rows.push((features, label));
    }
    if normalized[0].inst.is_some() {
        let d2 = d * d;
        for k in 0..d2 {
            let features: Vec<f64> = normalized
                .iter()
                .map(|g| g.inst.as_ref().unwrap().as_slice().unwrap()[k])
                .collect();
            let label = f64::from(truth.inst.as_slice().unwrap()[k]);
            rows.push((features, label));
        }
    }
    Ok(())
}

/// Ridge least squares of binary edge labels on the stacked per-slot
/// scores. The normal equations are (M+1)-dimensional, the bias column
/// is not penalized, and the solve is deterministic. At lambda = 0 a
/// redundant stack (duplicated methods) makes the system singular.
pub fn train_linear(
    train: &[(Vec<ScoreGraph>, GroundTruth)],
    lambda: f64,
    seed: u64,
) -> Result<LinearEnsembleModel> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble training set".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge lambda {lambda} must be >= 0")));
    }
    let m = train[0].0.len();
    let mut rows = Vec::new();
    for (graphs, truth) in train {
        if graphs.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "training sample with {} methods against {m}",
                graphs.len()
            )));
        }
        stacked_slots(graphs, truth, &mut rows)?;
    }
    let k = m + 1;
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut phi = DVector::<f64>::zeros(k);
    for (features, label) in &rows {
        for (j, &f) in features.iter().enumerate() {
            phi[j] = f;
        }
        phi[m] = 1.0;
        gram.syger(1.0, &phi, &phi, 1.0);
        rhs.axpy(*label, &phi, 1.0);
    }
    for j in 0..m {
        gram[(j, j)] += lambda;
    }
    let chol = Cholesky::new(gram).ok_or(Error::SingularSystem)?;
    // duplicated methods at lambda = 0 may survive factorization on
    // rounding noise; a collapsed pivot ratio is still singular
    let diag = chol.l_dirty().diagonal();
    let dmax = diag.iter().fold(0.0f64, |a, &v| a.max(v));
    let dmin = diag.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if !(dmin / dmax > 1e-7) {
        return Err(Error::SingularSystem);
    }
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(LinearEnsembleModel {
        weights: sol.as_slice()[..m].to_vec(),
        bias: sol[m],
        lambda,
        seed,
        normalization: NORMALIZATION_MINMAX.into(),
    })
}

/// Entrywise weighted sum plus bias. Inputs must carry the model's
/// normalization already; the combiner itself is affine in its inputs.
/// Shallow members contribute weight x 0 at slabs they do not score,
/// matching the zero-padded training convention.
pub fn apply_linear(model: &LinearEnsembleModel, graphs: &[ScoreGraph]) -> Result<ScoreGraph> {
    if graphs.len() != model.weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} graphs against {} model weights",
            graphs.len(),
            model.weights.len()
        )));
    }
    check_stack(graphs)?;
    let (d0, d1, _) = graphs[0].lagged.dim();
    let depth = deepest_lag(graphs);
    let mut lagged = Array3::<f64>::from_elem((d0, d1, depth), model.bias);
    for (g, &w) in graphs.iter().zip(&model.weights) {
        lagged.scaled_add(w, &pad_depth(&g.lagged, depth));
    }
    let inst = graphs[0].inst.as_ref().map(|first| {
        let mut acc = Array2::<f64>::from_elem(first.dim(), model.bias);
        for (g, &w) in graphs.iter().zip(&model.weights) {
            acc.scaled_add(w, g.inst.as_ref().expect("stack checked uniform"));
        }
        acc
    });
    Ok(ScoreGraph {
        lagged,
        inst,
        method: METHOD_ENSEMBLE_LINEAR.into(),
        hp: format!("lambda{}", model.lambda),
        sample: graphs[0].sample,
    })
}

/// Returns the prediction of the base method with the smallest mean
/// lag-resolved normalized SHD under the given violation. The selection
/// reads the ground-truth-derived robustness table, so this combiner is
/// a non-deployable reference ceiling, not a usable method.
pub fn pareto_oracle(
    profiles: &[RobustnessProfile],
    violation: &str,
    graphs: &[ScoreGraph],
) -> Result<ScoreGraph> {
    let mut best: Option<(f64, &str, &str)> = None;
    for p in profiles {
        if p.violation != violation
            || p.graph != GraphKind::Lwcg
            || p.metric != MetricId::ShdMinNorm
        {
            continue;
        }
        let better = match &best {
            None => true,
            Some((mean, method, hp)) => {
                p.mean < *mean
                    || (p.mean == *mean && (p.method.as_str(), p.hp.as_str()) < (*method, *hp))
            }
        };
        if better {
            best = Some((p.mean, &p.method, &p.hp));
        }
    }
    let Some((_, method, hp)) = best else {
        return Err(Error::UnknownViolation(violation.to_owned()));
    };
    let Some(winner) = graphs.iter().find(|g| g.method == method && g.hp == hp) else {
        return Err(Error::InvalidArgument(format!(
            "no prediction from {method}/{hp} in the oracle stack"
        )));
    };
    let mut out = winner.clone();
    out.method = METHOD_PARETO_ORACLE.into();
    out.hp = format!("{method}:{hp}");
    Ok(out)
}
