//! Baseline discovery methods over generated series: lagged cross
//! correlation and an OLS vector autoregression scored by |coefficient| or
//! 1 - p, plus ingestion of externally predicted score tensors.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array2, Array3};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::io::tensor;
use crate::numeric::pearson;

pub const METHOD_CROSS_CORR: &str = "cross_corr";
pub const METHOD_GVAR: &str = "gvar";

/// Real-valued edge beliefs prior to thresholding; higher = stronger.
/// Lag slot l holds lag l + 1, matching the ground-truth layout. `inst`
/// is absent for methods that do not score instantaneous edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGraph {
    pub lagged: Array3<f64>,
    pub inst: Option<Array2<f64>>,
    pub method: String,
    pub hp: String,
    pub sample: usize,
}

impl ScoreGraph {
    pub fn validate(&self) -> Result<()> {
        let (d0, d1, _) = self.lagged.dim();
        if d0 != d1 {
            return Err(Error::ShapeMismatch(format!(
                "lagged scores must be square, got {:?}",
                self.lagged.dim()
            )));
        }
        if self.lagged.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lagged scores".into()));
        }
        if let Some(b) = &self.inst {
            if b.nrows() != d0 || b.ncols() != d0 {
                return Err(Error::ShapeMismatch(format!(
                    "inst scores {}x{} against {d0} variables",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("inst scores".into()));
            }
        }
        Ok(())
    }
}

/// Lagged |Pearson correlation| between each pair at lags 1..=l_model.
/// Zero-variance slices score 0 rather than erroring.
pub fn cross_correlation_scores(x: &Array2<f64>, l_model: usize) -> Result<ScoreGraph> {
    let (d, t) = x.dim();
    if l_model == 0 {
        return Err(Error::InvalidArgument("cross correlation needs l_model >= 1".into()));
    }
    if t <= l_model + 2 {
        return Err(Error::InvalidArgument(format!(
            "series length {t} too short for l_model {l_model}"
        )));
    }
    let mut lagged = Array3::zeros((d, d, l_model));
    let rows: Vec<&[f64]> = (0..d)
        .map(|i| x.row(i).to_slice().expect("series rows are contiguous"))
        .collect();
    for lag in 1..=l_model {
        for i in 0..d {
            for j in 0..d {
                let r = pearson(&rows[j][..t - lag], &rows[i][lag..]).unwrap_or(0.0);
                lagged[(i, j, lag - 1)] = r.abs();
            }
        }
    }
    Ok(ScoreGraph {
        lagged,
        inst: None,
        method: METHOD_CROSS_CORR.into(),
        hp: format!("L{l_model}"),
        sample: 0,
    })
}

/// Per-target OLS VAR fit: coefficient, standard error, and two-sided
/// Student-t p-value per lagged regressor. Slot (i, d, l) is the effect of
/// X_d at lag l + 1 on X_i.
#[derive(Debug, Clone)]
pub struct GvarFit {
    pub coef: Array3<f64>,
    pub se: Array3<f64>,
    pub pval: Array3<f64>,
    pub l_model: usize,
    pub dof: f64,
}

pub fn gvar_fit(x: &Array2<f64>, l_model: usize) -> Result<GvarFit> {
    let (d, t) = x.dim();
    if l_model == 0 {
        return Err(Error::InvalidArgument("VAR fit needs l_model >= 1".into()));
    }
    let k = d * l_model + 1;
    if t <= l_model + k {
        return Err(Error::InvalidArgument(format!(
            "series length {t} cannot identify {k} unknowns at l_model {l_model}"
        )));
    }
    let rows = t - l_model;
    let dof = (rows - k) as f64;
    // column 0 is the intercept; the rest are variable-major lag blocks
    let design = DMatrix::from_fn(rows, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            let var = (c - 1) / l_model;
            let lag = (c - 1) % l_model + 1;
            x[(var, l_model + r - lag)]
        }
    });
    let gram = design.transpose() * &design;
    let chol = nalgebra::linalg::Cholesky::new(gram).ok_or(Error::RankDeficient)?;
    let l_diag = chol.l_dirty().diagonal();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &v in l_diag.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || lo <= hi * 1e-7 {
        return Err(Error::RankDeficient);
    }
    let gram_inv = chol.inverse();
    let student = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidArgument(format!("student-t dof {dof}: {e}")))?;

    let mut coef = Array3::zeros((d, d, l_model));
    let mut se = Array3::zeros((d, d, l_model));
    let mut pval = Array3::zeros((d, d, l_model));
    for i in 0..d {
        let y = DVector::from_fn(rows, |r, _| x[(i, l_model + r)]);
        let beta = chol.solve(&(design.transpose() * &y));
        let resid = &y - &design * &beta;
        let sigma2 = resid.norm_squared() / dof;
        for var in 0..d {
            for lag in 1..=l_model {
                let c = 1 + var * l_model + (lag - 1);
                let b = beta[c];
                let s = (sigma2 * gram_inv[(c, c)]).sqrt();
                let p = if s > 0.0 {
                    (2.0 * (1.0 - student.cdf((b / s).abs()))).clamp(0.0, 1.0)
                } else if b == 0.0 {
                    1.0
                } else {
                    0.0
                };
                coef[(i, var, lag - 1)] = b;
                se[(i, var, lag - 1)] = s;
                pval[(i, var, lag - 1)] = p;
            }
        }
    }
    Ok(GvarFit { coef, se, pval, l_model, dof })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    Coef,
    Pval,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Coef => "coef",
            ScoreMode::Pval => "pval",
        }
    }
}

pub fn gvar_scores(fit: &GvarFit, mode: ScoreMode) -> ScoreGraph {
    let lagged = match mode {
        ScoreMode::Coef => fit.coef.mapv(f64::abs),
        ScoreMode::Pval => fit.pval.mapv(|p| 1.0 - p),
    };
    ScoreGraph {
        lagged,
        inst: None,
        method: METHOD_GVAR.into(),
        hp: format!("L{}_{}", fit.l_model, mode.as_str()),
        sample: 0,
    }
}

/// Expected shape and identity of one external prediction file.
#[derive(Debug, Clone)]
pub struct ExternalSpec {
    pub d: usize,
    pub l_model: usize,
    /// When true the file carries dims (D, D, l_model + 1) with slab 0
    /// holding instantaneous scores; otherwise (D, D, l_model).
    pub inst: bool,
    pub method: String,
    pub hp: String,
    pub sample: usize,
}

pub fn ingest_external(path: &Path, expect: &ExternalSpec) -> Result<ScoreGraph> {
    let raw = tensor::read_array3(path)?;
    let want_slabs = expect.l_model + usize::from(expect.inst);
    let dim = raw.dim();
    if dim != (expect.d, expect.d, want_slabs) {
        return Err(Error::ShapeMismatch(format!(
            "{}: dims {dim:?}, manifest expects ({}, {}, {want_slabs})",
            path.display(),
            expect.d,
            expect.d
        )));
    }
    let (lagged, inst) = if expect.inst {
        (
            raw.slice(s![.., .., 1..]).to_owned(),
            Some(raw.slice(s![.., .., 0]).to_owned()),
        )
    } else {
        (raw, None)
    };
    let graph = ScoreGraph {
        lagged,
        inst,
        method: expect.method.clone(),
        hp: expect.hp.clone(),
        sample: expect.sample,
    };
    graph.validate()?;
    Ok(graph)
}

/// Inverse of ingest_external under the same shape convention.
pub fn write_external(path: &Path, graph: &ScoreGraph) -> Result<()> {
    graph.validate()?;
    let (d, _, l) = graph.lagged.dim();
    match &graph.inst {
        Some(b) => {
            let mut full = Array3::zeros((d, d, l + 1));
            full.slice_mut(s![.., .., 0]).assign(b);
            full.slice_mut(s![.., .., 1..]).assign(&graph.lagged);
            tensor::write_array3(path, full.view())
        }
        None => tensor::write_array3(path, graph.lagged.view()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_series(d: usize, t: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Array2::from_shape_fn((d, t), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn cross_correlation_finds_a_perfect_copy() {
        let t = 400;
        let base = normal_series(1, t, 1);
        let mut x = Array2::zeros((2, t));
        for s in 0..t {
            x[(0, s)] = base[(0, s)];
            if s >= 1 {
                x[(1, s)] = base[(0, s - 1)];
            }
        }
        let g = cross_correlation_scores(&x, 2).unwrap();
        assert!(g.lagged[(1, 0, 0)] > 0.999_999, "copy edge {}", g.lagged[(1, 0, 0)]);
        assert!(g.inst.is_none());
        assert_eq!(g.method, METHOD_CROSS_CORR);
    }

    #[test]
    fn cross_correlation_null_scores_stay_small() {
        let x = normal_series(4, 1000, 2);
        let g = cross_correlation_scores(&x, 3).unwrap();
        for &v in g.lagged.iter() {
            assert!((0.0..0.15).contains(&v), "null score {v}");
        }
    }

    #[test]
    fn cross_correlation_handles_constant_columns() {
        let mut x = normal_series(3, 200, 3);
        x.row_mut(1).fill(2.5);
        let g = cross_correlation_scores(&x, 2).unwrap();
        for i in 0..3 {
            for l in 0..2 {
                assert_eq!(g.lagged[(i, 1, l)], 0.0);
                assert_eq!(g.lagged[(1, i, l)], 0.0);
            }
        }
    }

    #[test]
    fn cross_correlation_is_affine_invariant() {
        let x = normal_series(3, 300, 4);
        let mut y = x.clone();
        let maps = [(2.0, -1.0), (-0.5, 3.0), (10.0, 0.25)];
        for (i, (a, b)) in maps.iter().enumerate() {
            y.row_mut(i).mapv_inplace(|v| a * v + b);
        }
        let gx = cross_correlation_scores(&x, 3).unwrap();
        let gy = cross_correlation_scores(&y, 3).unwrap();
        for (u, v) in gx.lagged.iter().zip(gy.lagged.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-9);
        }
    }

    #[test]
    fn cross_correlation_rejects_short_series() {
        let x = normal_series(2, 5, 5);
        assert!(cross_correlation_scores(&x, 3).is_err());
        assert!(cross_correlation_scores(&x, 0).is_err());
    }

    fn var_series(a: &Array3<f64>, t: usize, seed: u64) -> Array2<f64> {
        let (d, _, l) = a.dim();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((d, t));
        for s in 0..t {
            for i in 0..d {
                let mut v: f64 = StandardNormal.sample(&mut rng);
                for j in 0..d {
                    for lag in 1..=l {
                        if s >= lag {
                            v += a[(i, j, lag - 1)] * x[(j, s - lag)];
                        }
                    }
                }
                x[(i, s)] = v;
            }
        }
        x
    }

    #[test]
    fn gvar_recovers_var_coefficients() {
        let mut a = Array3::zeros((3, 3, 2));
        a[(0, 0, 0)] = 0.5;
        a[(1, 0, 0)] = -0.4;
        a[(1, 1, 1)] = 0.3;
        a[(2, 1, 0)] = 0.45;
        a[(2, 2, 1)] = -0.35;
        let x = var_series(&a, 10_000, 7);
        let fit = gvar_fit(&x, 2).unwrap();
        for (slot, &truth) in a.indexed_iter() {
            assert!(
                (fit.coef[slot] - truth).abs() < 0.02,
                "slot {slot:?}: {} vs {truth}",
                fit.coef[slot]
            );
        }
    }

    #[test]
    fn gvar_null_pvalues_are_calibrated() {
        let mut hits = 0;
        let n = 1000;
        for rep in 0..n {
            let x = normal_series(3, 300, 1000 + rep);
            let fit = gvar_fit(&x, 1).unwrap();
            if fit.pval[(0, 1, 0)] < 0.05 {
                hits += 1;
            }
        }
        let frac = hits as f64 / n as f64;
        assert!((frac - 0.05).abs() <= 0.02, "rejection rate {frac}");
    }

    #[test]
    fn gvar_rejects_degenerate_designs() {
        let x = normal_series(3, 200, 8);
        assert!(gvar_fit(&x, 0).is_err());
        assert!(gvar_fit(&normal_series(3, 10, 9), 3).is_err());

        let mut dup = normal_series(3, 200, 10);
        let col0 = dup.row(0).to_owned();
        dup.row_mut(1).assign(&col0);
        assert!(matches!(gvar_fit(&dup, 2), Err(Error::RankDeficient)));
    }

    #[test]
    fn gvar_pval_scores_are_affine_invariant_and_coef_scores_are_not() {
        let x = var_series(
            &{
                let mut a = Array3::zeros((2, 2, 1));
                a[(0, 1, 0)] = 0.4;
                a
            },
            500,
            11,
        );
        let mut y = x.clone();
        y.row_mut(0).mapv_inplace(|v| 3.0 * v - 2.0);
        y.row_mut(1).mapv_inplace(|v| -0.25 * v + 0.5);
        let fx = gvar_fit(&x, 1).unwrap();
        let fy = gvar_fit(&y, 1).unwrap();
        for (u, v) in fx.pval.iter().zip(fy.pval.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-9);
        }
        let coef_gap: f64 = fx
            .coef
            .iter()
            .zip(fy.coef.iter())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        assert!(coef_gap > 1e-3, "coef scores unexpectedly scale-free");
    }

    #[test]
    fn gvar_score_modes_agree_on_a_strong_edge() {
        let mut a = Array3::zeros((3, 3, 1));
        a[(0, 1, 0)] = 0.8;
        let x = var_series(&a, 500, 12);
        let fit = gvar_fit(&x, 1).unwrap();
        let argmax = |g: &ScoreGraph| {
            g.lagged
                .indexed_iter()
                .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
                .map(|(idx, _)| idx)
                .unwrap()
        };
        let coef = gvar_scores(&fit, ScoreMode::Coef);
        let pval = gvar_scores(&fit, ScoreMode::Pval);
        assert_eq!(argmax(&coef), (0, 1, 0));
        assert_eq!(argmax(&coef), argmax(&pval));
        assert_abs_diff_eq!(coef.lagged[(0, 1, 0)], fit.coef[(0, 1, 0)].abs(), epsilon = 0.0);
        for &v in pval.lagged.iter() {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn external_round_trip_and_shape_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.tcda");
        let lagged = Array3::from_shape_fn((3, 3, 2), |(i, j, l)| (i + 2 * j + 5 * l) as f64 / 20.0);
        // symmetric inst scores model an undirected predictor
        let inst = Array2::from_shape_fn((3, 3), |(i, j)| ((i * j) as f64).sqrt() / 3.0);
        let g = ScoreGraph {
            lagged: lagged.clone(),
            inst: Some(inst.clone()),
            method: "external_pcmci".into(),
            hp: "default".into(),
            sample: 4,
        };
        write_external(&path, &g).unwrap();
        let spec = ExternalSpec {
            d: 3,
            l_model: 2,
            inst: true,
            method: "external_pcmci".into(),
            hp: "default".into(),
            sample: 4,
        };
        let back = ingest_external(&path, &spec).unwrap();
        assert_eq!(back, g);

        let wrong = ExternalSpec { l_model: 4, ..spec.clone() };
        assert!(matches!(ingest_external(&path, &wrong), Err(Error::ShapeMismatch(_))));
        let no_inst = ExternalSpec { inst: false, l_model: 3, ..spec };
        let reinterpreted = ingest_external(&path, &no_inst).unwrap();
        assert_eq!(reinterpreted.lagged.dim(), (3, 3, 3));
    }

    #[test]
    fn scores_are_deterministic() {
        let x = normal_series(4, 400, 13);
        let g1 = cross_correlation_scores(&x, 2).unwrap();
        let g2 = cross_correlation_scores(&x, 2).unwrap();
        assert_eq!(g1, g2);
        let f1 = gvar_fit(&x, 2).unwrap();
        let f2 = gvar_fit(&x, 2).unwrap();
        assert_eq!(f1.coef, f2.coef);
        assert_eq!(f1.pval, f2.pval);
    }

    #[test]
    fn validate_flags_bad_graphs() {
        let ok = ScoreGraph {
            lagged: Array3::zeros((2, 2, 1)),
            inst: Some(Array2::zeros((2, 2))),
            method: "m".into(),
            hp: "h".into(),
            sample: 0,
        };
        assert!(ok.validate().is_ok());
        let mut nan = ok.clone();
        nan.lagged[(0, 1, 0)] = f64::NAN;
        assert!(matches!(nan.validate(), Err(Error::NonFinite(_))));
        let mut lop = ok;
        lop.inst = Some(Array2::zeros((3, 3)));
        assert!(matches!(lop.validate(), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn pearson_helper_matches_manual_computation() {
        let a = Array1::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let b = Array1::from_vec(vec![2.0, 4.1, 5.9, 8.2]);
        let r = pearson(a.as_slice().unwrap(), b.as_slice().unwrap()).unwrap();
        assert!(r > 0.998, "r {r}");
    }
}
