//! SCM representation, ground-truth graph projections, and structural
//! validity checks run before simulation.

use std::collections::HashMap;

use nalgebra::DMatrix;
use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funclib::FunctionDescriptor;
use crate::noise::InnovationSpec;

pub const ACYCLIC_TOL: f64 = 1e-8;
pub const STABLE_MARGIN: f64 = 1e-9;

/// One data-generating condition; sixteen combinations exist in the default
/// plan. `t == 0` marks a regime whose length is dictated by the violation
/// schedule (series-length violation), removing T from the regime axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub d: usize,
    pub l: usize,
    pub t: usize,
    pub p_lag: f64,
    pub p_inst: f64,
}

impl Regime {
    pub fn new(d: usize, l: usize, t: usize, p_lag: f64, p_inst: f64) -> Self {
        Self { d, l, t, p_lag, p_inst }
    }

    /// Stable identifier used in result rows and RNG keys.
    pub fn id(&self) -> String {
        if self.t == 0 {
            format!("d{}l{}pl{}pi{}", self.d, self.l, self.p_lag, self.p_inst)
        } else {
            format!("d{}l{}t{}pl{}pi{}", self.d, self.l, self.t, self.p_lag, self.p_inst)
        }
    }

    /// The default 16-regime grid.
    pub fn default_grid() -> Vec<Regime> {
        let mut out = Vec::with_capacity(16);
        for &(d, l) in &[(5usize, 3usize), (7, 4)] {
            for &t in &[250usize, 1000] {
                for &p_lag in &[0.075, 0.15] {
                    for &p_inst in &[0.0, 0.1] {
                        out.push(Regime::new(d, l, t, p_lag, p_inst));
                    }
                }
            }
        }
        out
    }
}

/// Slot of one causal link; lag index is 1-based (lag l means X_{d,t-l}).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkSlot {
    Lagged(usize, usize, usize),
    Inst(usize, usize),
}

/// Fully specified structural causal model over `d` simulated variables.
/// A trailing `hidden_tail` block (lagged confounder) is simulated but
/// stripped from the output and the ground truth.
#[derive(Debug, Clone)]
pub struct ScmSpec {
    pub d: usize,
    pub l: usize,
    /// Lagged coefficients, entry (i, d, l-1) is the effect of X_{d,t-l} on X_{i,t}.
    pub a: Array3<f64>,
    /// Instantaneous coefficients, entry (i, d) is the effect of X_{d,t} on X_{i,t}.
    pub b: Array2<f64>,
    /// Nonstationarity segments: (first step of the segment, coefficients).
    pub a_segments: Vec<(usize, Array3<f64>)>,
    /// Per-link transforms; identity where absent.
    pub functions: HashMap<LinkSlot, FunctionDescriptor>,
    pub noise_cfg: InnovationSpec,
    pub hidden_tail: usize,
    /// Exogenous instantaneous confounders: d_vis x n coefficients, 0 = no link.
    pub inst_confounders: Option<Array2<f64>>,
}

impl ScmSpec {
    pub fn linear(d: usize, l: usize, a: Array3<f64>, b: Array2<f64>) -> Self {
        Self {
            d,
            l,
            a,
            b,
            a_segments: Vec::new(),
            functions: HashMap::new(),
            noise_cfg: InnovationSpec::Gaussian,
            hidden_tail: 0,
            inst_confounders: None,
        }
    }

    /// Number of visible (emitted) variables.
    pub fn d_visible(&self) -> usize {
        self.d - self.hidden_tail
    }
}

/// Binary ground-truth projections over the visible variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub lwcg: Array3<u8>,
    pub inst: Array2<u8>,
    pub lsg: Array2<u8>,
}

/// Lag-resolved support over the visible block; for nonstationary SCMs the
/// support is the union across all segments.
pub fn project_lwcg(scm: &ScmSpec) -> Array3<u8> {
    let dv = scm.d_visible();
    let mut out = Array3::<u8>::zeros((dv, dv, scm.l));
    let mut mark = |a: &Array3<f64>| {
        for i in 0..dv {
            for d in 0..dv {
                for l in 0..scm.l {
                    if a[(i, d, l)] != 0.0 {
                        out[(i, d, l)] = 1;
                    }
                }
            }
        }
    };
    mark(&scm.a);
    for (_, seg) in &scm.a_segments {
        mark(seg);
    }
    out
}

pub fn project_inst(scm: &ScmSpec) -> Array2<u8> {
    let dv = scm.d_visible();
    let mut out = Array2::<u8>::zeros((dv, dv));
    for i in 0..dv {
        for d in 0..dv {
            if scm.b[(i, d)] != 0.0 {
                out[(i, d)] = 1;
            }
        }
    }
    out
}

/// Logical OR over the lag axis.
pub fn project_lsg(lwcg: &Array3<u8>) -> Array2<u8> {
    let (d0, d1, _) = lwcg.dim();
    let mut out = Array2::<u8>::zeros((d0, d1));
    for i in 0..d0 {
        for j in 0..d1 {
            if lwcg.slice(ndarray::s![i, j, ..]).iter().any(|&v| v != 0) {
                out[(i, j)] = 1;
            }
        }
    }
    out
}

pub fn ground_truth(scm: &ScmSpec) -> GroundTruth {
    let lwcg = project_lwcg(scm);
    let lsg = project_lsg(&lwcg);
    GroundTruth { lwcg, inst: project_inst(scm), lsg }
}

/// Trace-exponential acyclicity test on the support of B:
/// trace(exp(B .* B)) == D exactly characterizes a DAG. The squared entries
/// are binarized so the verdict is magnitude-independent; any cycle then
/// shifts the trace by at least 1/D!, far above the tolerance.
pub fn check_acyclic(b: &Array2<f64>) -> bool {
    let d = b.nrows();
    assert_eq!(d, b.ncols(), "check_acyclic needs a square matrix");
    let sq = DMatrix::from_fn(d, d, |i, j| {
        let v = b[(i, j)];
        if v * v > 0.0 {
            1.0
        } else {
            0.0
        }
    });
    (sq.exp().trace() - d as f64).abs() <= ACYCLIC_TOL
}

/// DL x DL companion matrix of the lagged coefficient tensor.
pub fn companion(a: &Array3<f64>) -> DMatrix<f64> {
    let (d, d2, l) = a.dim();
    assert_eq!(d, d2);
    let n = d * l;
    let mut f = DMatrix::<f64>::zeros(n, n);
    for lag in 0..l {
        for i in 0..d {
            for j in 0..d {
                f[(i, lag * d + j)] = a[(i, j, lag)];
            }
        }
    }
    for k in 0..n - d {
        f[(d + k, k)] = 1.0;
    }
    f
}

/// Spectral radius via Gelfand's formula on scaled repeated squares:
/// rho = lim ||F^k||^(1/k) with k = 2^40, normalizing each square so the
/// iteration neither overflows nor underflows. Unlike QR eigenvalue
/// iteration this cannot stall on nilpotent companion matrices, and the
/// non-normal transient decays as log(C)/2^40.
pub fn spectral_radius(f: &DMatrix<f64>) -> f64 {
    const SQUARINGS: u32 = 40;
    let mut m = f.clone();
    let mut log_scale = 0.0f64;
    for _ in 0..SQUARINGS {
        let norm = m.amax();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        m = &m * &m;
    }
    let tail = m.amax();
    if tail == 0.0 {
        return 0.0;
    }
    ((log_scale + tail.ln()) / 2f64.powi(SQUARINGS as i32)).exp()
}

/// VAR stability: spectral radius of the companion matrix strictly below one.
pub fn check_var_stable(a: &Array3<f64>) -> Result<bool> {
    let (d, d2, l) = a.dim();
    if d != d2 {
        return Err(Error::ShapeMismatch(format!("lag tensor {d}x{d2} not square")));
    }
    if l == 0 {
        return Err(Error::InvalidArgument("lag tensor needs L >= 1".into()));
    }
    Ok(spectral_radius(&companion(a)) < 1.0 - STABLE_MARGIN)
}

/// Expected link count D*D*L*p_lag + D*D*p_inst (instantaneous slots counted
/// before the diagonal filter).
pub fn expected_link_count(regime: &Regime) -> f64 {
    let d = regime.d as f64;
    let l = regime.l as f64;
    d * d * l * regime.p_lag + d * d * regime.p_inst
}

/// Support draw for one SCM. The diagonal of the instantaneous support is
/// zeroed after sampling; `inst_prefilter` counts the raw draws so expected
/// link counts can be checked against the pre-filter rate.
pub struct SupportDraw {
    pub lagged: Array3<u8>,
    pub inst: Array2<u8>,
    pub inst_prefilter: u32,
}

pub fn sample_supports<R: Rng>(regime: &Regime, rng: &mut R) -> SupportDraw {
    let (d, l) = (regime.d, regime.l);
    let mut lagged = Array3::<u8>::zeros((d, d, l));
    for i in 0..d {
        for j in 0..d {
            for lag in 0..l {
                if rng.gen::<f64>() < regime.p_lag {
                    lagged[(i, j, lag)] = 1;
                }
            }
        }
    }
    let mut inst = Array2::<u8>::zeros((d, d));
    let mut inst_prefilter = 0;
    for i in 0..d {
        for j in 0..d {
            if rng.gen::<f64>() < regime.p_inst {
                inst_prefilter += 1;
                if i != j {
                    inst[(i, j)] = 1;
                }
            }
        }
    }
    SupportDraw { lagged, inst, inst_prefilter }
}
