//! SCM sampling per regime and violation, guarded time-series simulation,
//! and the post-hoc transform pipeline behind batch generation.

use std::collections::HashMap;

use ndarray::{s, Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funclib::{self, FunctionDescriptor};
use crate::noise::{
    self, ExogenousPool, InnovationSpec, NgBlend, NoiseKernel, NoiseKind, DEFAULT_CUTOFF,
};
use crate::rng;
use crate::scm::{self, GroundTruth, LinkSlot, Regime, ScmSpec};
use crate::violations::{self, Param, ScheduleVariant, ViolationConfig, ViolationId};

/// Attempts allowed per sample before giving up on SCM acceptance or guards.
pub const RETRY_BUDGET: usize = 1000;
/// Coefficient redraws per accepted support before the support is redrawn.
const COEF_TRIES: usize = 100;
/// Hard divergence bound on |X|.
pub const DIVERGENCE_BOUND: f64 = 25.0;
/// Consecutive strict increases of |X| that count as divergence.
pub const MONOTONE_RUN: usize = 10;
/// Number of exogenous instantaneous confounders Z.
pub const CONF_INST_N: usize = 2;
/// Slope of the MAR/MNAR missingness sigmoid.
pub const MISSING_BETA: f64 = 3.5;
/// Confounder link magnitudes, stronger than regular coefficients.
pub const CONF_COEF: (f64, f64) = (0.8, 0.9);
/// Regular coefficient magnitudes.
pub const BASE_COEF: (f64, f64) = (0.3, 0.5);
/// Channels in the stand-in exogenous pool.
const STANDIN_CHANNELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissKind {
    Mcar,
    Mar,
    Mnar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FaithKind {
    Inst,
    Lag,
}

#[derive(Debug, Clone)]
enum NlAssign {
    Mono { level: u8 },
    Trend { n_points: usize },
    Rbf { p: f64 },
    Comp { p: f64 },
}

/// Violation knobs resolved against one regime.
#[derive(Debug, Clone)]
pub struct GenOptions {
    t: usize,
    coef_interval: (f64, f64),
    signed_coef: bool,
    faith: Option<(FaithKind, f64)>,
    conf_inst_p: Option<f64>,
    conf_lag_p: Option<f64>,
    nl: Option<NlAssign>,
    inno: InnoChoice,
    coef_delta: Option<f64>,
    stat_changes: Option<usize>,
    empty: Vec<(usize, usize)>,
    obs: Option<(NoiseKind, f64)>,
    missing: Option<(MissKind, f64)>,
    scale_alpha: Option<f64>,
}

#[derive(Debug, Clone)]
enum InnoChoice {
    Gaussian,
    Structured { kind: NoiseKind, alpha: f64 },
    NonGaussian { dist: noise::NgDist, alpha: f64 },
    UnequalVar { lo: (f64, f64), hi: (f64, f64) },
}

impl GenOptions {
    pub fn series_length(&self) -> usize {
        self.t
    }
}

/// Resolves a composed violation list against one regime.
pub fn resolve_options(configs: &[ViolationConfig], regime: &Regime) -> Result<GenOptions> {
    let mut t = regime.t;
    for c in configs {
        if let Param::SeriesLength(n) = c.param {
            t = n;
        }
    }
    if t < 2 {
        return Err(Error::InvalidArgument(format!("series length {t} too short")));
    }
    let mut opts = GenOptions {
        t,
        coef_interval: BASE_COEF,
        signed_coef: true,
        faith: None,
        conf_inst_p: None,
        conf_lag_p: None,
        nl: None,
        inno: InnoChoice::Gaussian,
        coef_delta: None,
        stat_changes: None,
        empty: Vec::new(),
        obs: None,
        missing: None,
        scale_alpha: None,
    };
    for c in configs {
        match (c.id, &c.param) {
            (id, Param::Snr(snr)) if id.obs_kind().is_some() => {
                opts.obs = Some((id.obs_kind().unwrap(), *snr));
            }
            (ViolationId::ConfInst, Param::LinkProb(p)) => opts.conf_inst_p = Some(*p),
            (ViolationId::ConfLag, Param::LinkProb(p)) => opts.conf_lag_p = Some(*p),
            (ViolationId::FaithInst, Param::Distortion(d)) => {
                opts.faith = Some((FaithKind::Inst, *d));
            }
            (ViolationId::FaithLag, Param::Distortion(d)) => {
                if regime.l < 2 {
                    return Err(Error::InvalidArgument(
                        "lagged faithfulness structure needs L >= 2".into(),
                    ));
                }
                opts.faith = Some((FaithKind::Lag, *d));
            }
            (ViolationId::FaithZero, Param::CoefMagnitude(lo, hi)) => {
                opts.coef_interval = (*lo, *hi);
            }
            (ViolationId::NlMono, Param::BetaIntervals { .. }) => {
                opts.nl = Some(NlAssign::Mono { level: c.level });
            }
            (ViolationId::NlTrend, Param::SplinePoints(n)) => {
                opts.nl = Some(NlAssign::Trend { n_points: *n });
            }
            (ViolationId::NlRbf, Param::LinkProb(p)) => opts.nl = Some(NlAssign::Rbf { p: *p }),
            (ViolationId::NlComp, Param::LinkProb(p)) => opts.nl = Some(NlAssign::Comp { p: *p }),
            (id, Param::BlendAlpha(alpha)) if id.inno_kind().is_some() => {
                opts.inno = InnoChoice::Structured { kind: id.inno_kind().unwrap(), alpha: *alpha };
            }
            (id, Param::BlendAlpha(alpha)) if id.ng_dist().is_some() => {
                opts.inno = InnoChoice::NonGaussian { dist: id.ng_dist().unwrap(), alpha: *alpha };
            }
            (ViolationId::InnoVar, Param::VarIntervals { lo, hi }) => {
                opts.inno = InnoChoice::UnequalVar { lo: *lo, hi: *hi };
            }
            (ViolationId::Coef, Param::CoefDelta(d)) => opts.coef_delta = Some(*d),
            (ViolationId::Stat, Param::NumChanges(n)) => opts.stat_changes = Some(*n),
            (ViolationId::Length, Param::SeriesLength(_)) => {}
            (ViolationId::Mcar, Param::MissingRate(r)) => {
                opts.missing = Some((MissKind::Mcar, *r));
            }
            (ViolationId::Mar, Param::MissingRate(r)) => opts.missing = Some((MissKind::Mar, *r)),
            (ViolationId::Mnar, Param::MissingRate(r)) => {
                opts.missing = Some((MissKind::Mnar, *r));
            }
            (ViolationId::Empty, p @ Param::EmptyIntervals { .. }) => {
                opts.empty = violations::empty_intervals(p, t);
            }
            (ViolationId::Scale, Param::BlendAlpha(alpha)) => opts.scale_alpha = Some(*alpha),
            (id, p) => {
                return Err(Error::Config(format!("{:?} cannot carry {p:?}", id.as_str())));
            }
        }
    }
    Ok(opts)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Signed coefficient from the magnitude interval; sign uniform.
fn draw_coef<R: Rng>(interval: (f64, f64), signed: bool, rng: &mut R) -> f64 {
    let mag = if interval.0 == interval.1 {
        interval.0
    } else {
        rng.gen_range(interval.0..interval.1)
    };
    if signed && rng.gen_range(0..2u8) == 0 {
        -mag
    } else {
        mag
    }
}

/// Support mask values: 0 none, 1 regular link, 2 confounder link.
fn draw_lag_support<R: Rng>(
    d_vis: usize,
    d_tot: usize,
    l: usize,
    p_lag: f64,
    conf_p: Option<f64>,
    rng: &mut R,
) -> Array3<u8> {
    let mut mask = Array3::zeros((d_tot, d_tot, l));
    for i in 0..d_vis {
        for j in 0..d_vis {
            for k in 0..l {
                if rng.gen::<f64>() < p_lag {
                    mask[(i, j, k)] = 1;
                }
            }
        }
    }
    if let Some(p) = conf_p {
        let c = d_vis;
        for i in 0..d_vis {
            if rng.gen::<f64>() < p {
                let lag = rng.gen_range(0..l);
                mask[(i, c, lag)] = 2;
            }
            if rng.gen::<f64>() < p {
                let lag = rng.gen_range(0..l);
                mask[(c, i, lag)] = 2;
            }
        }
        for k in 0..l {
            if rng.gen::<f64>() < p_lag {
                mask[(c, c, k)] = 1;
            }
        }
    }
    mask
}

fn assign_lag_coefs<R: Rng>(mask: &Array3<u8>, opts: &GenOptions, rng: &mut R) -> Array3<f64> {
    let mut a = Array3::zeros(mask.dim());
    for (idx, &m) in mask.indexed_iter() {
        match m {
            1 => a[idx] = draw_coef(opts.coef_interval, opts.signed_coef, rng),
            2 => a[idx] = draw_coef(CONF_COEF, false, rng),
            _ => {}
        }
    }
    a
}

/// Support + coefficients for a stable lagged tensor; support kept between
/// coefficient redraws, redrawn only when no stable assignment is found.
fn draw_stable_lagged<R: Rng>(
    d_vis: usize,
    d_tot: usize,
    l: usize,
    p_lag: f64,
    conf_p: Option<f64>,
    opts: &GenOptions,
    rng: &mut R,
) -> Result<Option<Array3<f64>>> {
    let mask = draw_lag_support(d_vis, d_tot, l, p_lag, conf_p, rng);
    for _ in 0..COEF_TRIES {
        let a = assign_lag_coefs(&mask, opts, rng);
        if scm::check_var_stable(&a)? {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

fn draw_acyclic_inst<R: Rng>(d_vis: usize, d_tot: usize, p_inst: f64, rng: &mut R) -> Result<Array2<u8>> {
    for _ in 0..RETRY_BUDGET {
        let mut mask = Array2::zeros((d_tot, d_tot));
        for i in 0..d_vis {
            for j in 0..d_vis {
                if i != j && rng.gen::<f64>() < p_inst {
                    mask[(i, j)] = 1;
                }
            }
        }
        let as_f64 = mask.mapv(|m: u8| f64::from(m));
        if scm::check_acyclic(&as_f64) {
            return Ok(mask);
        }
    }
    Err(Error::RetryExhausted { budget: RETRY_BUDGET, context: "acyclic support".into() })
}

/// Distinct (j, k, i) by partial Fisher-Yates over the visible indices.
fn draw_triple<R: Rng>(d_vis: usize, rng: &mut R) -> (usize, usize, usize) {
    let mut idx: Vec<usize> = (0..d_vis).collect();
    for n in 0..3 {
        let pick = n + rng.gen_range(0..d_vis - n);
        idx.swap(n, pick);
    }
    (idx[0], idx[1], idx[2])
}

/// Cancellation structure: X_j -> X_k -> X_i plus direct X_j -> X_i whose
/// total effect on X_i is the distortion d. Rows i and k lose all other
/// parents so the cancellation is exact.
fn inject_faith<R: Rng>(
    a: &mut Array3<f64>,
    b: &mut Array2<f64>,
    d_vis: usize,
    kind: FaithKind,
    distortion: f64,
    rng: &mut R,
) {
    let (j, k, i) = draw_triple(d_vis, rng);
    let v = rng.gen_range(0.3..0.5);
    for target in [i, k] {
        a.slice_mut(s![target, .., ..]).fill(0.0);
        b.slice_mut(s![target, ..]).fill(0.0);
    }
    match kind {
        FaithKind::Inst => {
            b[(k, j)] = 2.0 * v;
            b[(i, k)] = 0.5;
            b[(i, j)] = -v + distortion;
        }
        FaithKind::Lag => {
            a[(k, j, 0)] = 2.0 * v;
            a[(i, k, 0)] = 0.5;
            a[(i, j, 1)] = -v + distortion;
        }
    }
}

fn union_lag_slots(a: &Array3<f64>, segments: &[(usize, Array3<f64>)]) -> Vec<(usize, usize, usize)> {
    let (d, _, l) = a.dim();
    let mut slots = Vec::new();
    for i in 0..d {
        for j in 0..d {
            for k in 0..l {
                let hit = a[(i, j, k)] != 0.0
                    || segments.iter().any(|(_, seg)| seg[(i, j, k)] != 0.0);
                if hit {
                    slots.push((i, j, k));
                }
            }
        }
    }
    slots
}

fn assign_functions<R: Rng>(
    a: &Array3<f64>,
    segments: &[(usize, Array3<f64>)],
    b: &Array2<f64>,
    nl: &NlAssign,
    rng: &mut R,
) -> Result<HashMap<LinkSlot, FunctionDescriptor>> {
    let mut slots: Vec<LinkSlot> = union_lag_slots(a, segments)
        .into_iter()
        .map(|(i, j, k)| LinkSlot::Lagged(i, j, k + 1))
        .collect();
    let d = b.nrows();
    for i in 0..d {
        for j in 0..d {
            if b[(i, j)] != 0.0 {
                slots.push(LinkSlot::Inst(i, j));
            }
        }
    }
    let mut functions = HashMap::new();
    for slot in slots {
        let descriptor = match nl {
            NlAssign::Mono { level } => Some(funclib::sample_monotonic(*level, rng)),
            NlAssign::Trend { n_points } => Some(funclib::sample_spline_trend(*n_points, rng)?),
            NlAssign::Rbf { p } => {
                if rng.gen::<f64>() < *p {
                    Some(funclib::sample_gp_rbf(rng)?)
                } else {
                    None
                }
            }
            NlAssign::Comp { p } => {
                if rng.gen::<f64>() < *p {
                    Some(funclib::sample_composite(rng))
                } else {
                    None
                }
            }
        };
        if let Some(desc) = descriptor {
            functions.insert(slot, desc);
        }
    }
    Ok(functions)
}

/// Samples one accepted SCM for the regime under the resolved options.
pub fn sample_scm<R: Rng>(regime: &Regime, opts: &GenOptions, rng: &mut R) -> Result<ScmSpec> {
    let d_vis = regime.d;
    let hidden = usize::from(opts.conf_lag_p.is_some());
    let d_tot = d_vis + hidden;
    let l = regime.l.max(1);
    let t = opts.t;
    for _ in 0..RETRY_BUDGET {
        let Some(mut a) =
            draw_stable_lagged(d_vis, d_tot, l, regime.p_lag, opts.conf_lag_p, opts, rng)?
        else {
            continue;
        };
        let inst_mask = draw_acyclic_inst(d_vis, d_tot, regime.p_inst, rng)?;
        let mut b = Array2::zeros((d_tot, d_tot));
        for (idx, &m) in inst_mask.indexed_iter() {
            if m == 1 {
                b[idx] = draw_coef(opts.coef_interval, opts.signed_coef, rng);
            }
        }
        if let Some((kind, distortion)) = opts.faith {
            inject_faith(&mut a, &mut b, d_vis, kind, distortion, rng);
            if !scm::check_acyclic(&b) || !scm::check_var_stable(&a)? {
                continue;
            }
        }
        let mut a_segments: Vec<(usize, Array3<f64>)> = Vec::new();
        if let Some(n) = opts.stat_changes {
            let mut ok = true;
            for step in violations::stat_change_points(t, n) {
                match draw_stable_lagged(d_vis, d_tot, l, regime.p_lag, opts.conf_lag_p, opts, rng)?
                {
                    Some(seg) => a_segments.push((step, seg)),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
        } else if let Some(delta) = opts.coef_delta {
            let mut current = a.clone();
            for step in violations::coef_change_points(t) {
                for v in current.iter_mut() {
                    if *v != 0.0 {
                        *v += rng.gen_range(-delta..delta);
                    }
                }
                a_segments.push((step, current.clone()));
            }
        }
        let functions = match &opts.nl {
            Some(nl) => assign_functions(&a, &a_segments, &b, nl, rng)?,
            None => HashMap::new(),
        };
        let noise_cfg = match &opts.inno {
            InnoChoice::Gaussian => InnovationSpec::Gaussian,
            InnoChoice::Structured { kind, alpha } => {
                InnovationSpec::Structured { kind: *kind, alpha: *alpha }
            }
            InnoChoice::NonGaussian { dist, alpha } => {
                InnovationSpec::NonGaussian { dist: *dist, alpha: *alpha }
            }
            InnoChoice::UnequalVar { lo, hi } => InnovationSpec::UnequalVar {
                sigma2: noise::sample_unequal_variances(*lo, *hi, d_tot, rng),
            },
        };
        let inst_confounders = opts.conf_inst_p.map(|p| {
            let mut z = Array2::zeros((d_vis, CONF_INST_N));
            for i in 0..d_vis {
                for n in 0..CONF_INST_N {
                    if rng.gen::<f64>() < p {
                        z[(i, n)] = draw_coef(CONF_COEF, false, rng);
                    }
                }
            }
            z
        });
        return Ok(ScmSpec {
            d: d_tot,
            l,
            a,
            b,
            a_segments,
            functions,
            noise_cfg,
            hidden_tail: hidden,
            inst_confounders,
        });
    }
    Err(Error::RetryExhausted { budget: RETRY_BUDGET, context: "scm acceptance".into() })
}

/// Kahn topological order over the instantaneous support, smallest index first.
fn topo_order(b: &Array2<f64>) -> Vec<usize> {
    let d = b.nrows();
    let mut in_deg = vec![0usize; d];
    for i in 0..d {
        for j in 0..d {
            if b[(i, j)] != 0.0 {
                in_deg[i] += 1;
            }
        }
    }
    let mut order = Vec::with_capacity(d);
    let mut done = vec![false; d];
    for _ in 0..d {
        let next = (0..d)
            .find(|&i| !done[i] && in_deg[i] == 0)
            .expect("acyclic instantaneous support");
        done[next] = true;
        order.push(next);
        for i in 0..d {
            if b[(i, next)] != 0.0 {
                in_deg[i] -= 1;
            }
        }
    }
    order
}

/// Simulation result: either a full series or a tripped divergence guard
/// asking for a fresh SCM.
#[derive(Debug)]
pub enum SimOutcome {
    Series(Array2<f64>),
    GuardTripped,
}

enum StepNoise {
    Gaussian,
    Structured { kernel: NoiseKernel, alpha: f64 },
    NonGaussian(NgBlend),
    Unequal(Vec<f64>),
}

/// Simulates `t` steps of the SCM; `empty` intervals zero all parent sets.
pub fn simulate<R: Rng>(
    spec: &ScmSpec,
    t: usize,
    empty: &[(usize, usize)],
    pool: Option<&ExogenousPool>,
    rng: &mut R,
) -> Result<SimOutcome> {
    let d = spec.d;
    let l = spec.l;
    let init = l.max(1).min(t);
    let mut compiled = HashMap::new();
    for (slot, desc) in &spec.functions {
        compiled.insert(*slot, desc.compile()?);
    }
    let mut noise_state = match &spec.noise_cfg {
        InnovationSpec::Gaussian => StepNoise::Gaussian,
        InnovationSpec::Structured { kind, alpha } => StepNoise::Structured {
            kernel: NoiseKernel::new(*kind, d, t, pool, rng)?,
            alpha: *alpha,
        },
        InnovationSpec::NonGaussian { dist, alpha } => {
            StepNoise::NonGaussian(NgBlend::new(*dist, *alpha))
        }
        InnovationSpec::UnequalVar { sigma2 } => {
            if sigma2.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "sigma2 has {} entries for {d} variables",
                    sigma2.len()
                )));
            }
            StepNoise::Unequal(sigma2.iter().map(|v| v.sqrt()).collect())
        }
    };
    let order = topo_order(&spec.b);
    let mul_kind =
        matches!(&spec.noise_cfg, InnovationSpec::Structured { kind: NoiseKind::Mul, .. });
    let ones = vec![1.0; d];
    let mut x = Array2::zeros((d, t));
    let mut run = vec![0usize; d];
    for step in 0..init {
        for i in 0..d {
            x[(i, step)] = normal(rng);
        }
    }
    let mut seg_ptr = 0usize;
    for step in init..t {
        while seg_ptr < spec.a_segments.len() && spec.a_segments[seg_ptr].0 <= step {
            seg_ptr += 1;
        }
        let a_cur = if seg_ptr == 0 { &spec.a } else { &spec.a_segments[seg_ptr - 1].1 };
        let in_empty = empty.iter().any(|&(s0, e0)| step >= s0 && step < e0);
        // fixed per-step draw order: kernel raw, base noise, confounders
        let raw = match &mut noise_state {
            StepNoise::Structured { kernel, .. } => kernel.kernel_step(step, &ones, rng),
            _ => Vec::new(),
        };
        let eta: Vec<f64> = match &noise_state {
            StepNoise::Gaussian | StepNoise::Structured { .. } => {
                (0..d).map(|_| normal(rng)).collect()
            }
            StepNoise::NonGaussian(blend) => (0..d).map(|_| blend.draw(rng)).collect(),
            StepNoise::Unequal(sigma) => (0..d).map(|i| sigma[i] * normal(rng)).collect(),
        };
        let z: Option<Vec<f64>> = spec
            .inst_confounders
            .as_ref()
            .map(|_| (0..CONF_INST_N).map(|_| normal(rng)).collect());
        for &i in &order {
            let mut base = 0.0;
            if !in_empty {
                for j in 0..d {
                    for lag in 1..=l {
                        let coef = a_cur[(i, j, lag - 1)];
                        if coef != 0.0 {
                            let arg = x[(j, step - lag)];
                            let val = match compiled.get(&LinkSlot::Lagged(i, j, lag)) {
                                Some(f) => f.eval(arg),
                                None => arg,
                            };
                            base += coef * val;
                        }
                    }
                    let coef = spec.b[(i, j)];
                    if coef != 0.0 {
                        let arg = x[(j, step)];
                        let val = match compiled.get(&LinkSlot::Inst(i, j)) {
                            Some(f) => f.eval(arg),
                            None => arg,
                        };
                        base += coef * val;
                    }
                }
                if let (Some(conf), Some(zv)) = (spec.inst_confounders.as_ref(), z.as_ref()) {
                    if i < conf.nrows() {
                        for (n, zn) in zv.iter().enumerate() {
                            base += conf[(i, n)] * zn;
                        }
                    }
                }
            }
            let inno = match &noise_state {
                StepNoise::Structured { alpha, .. } => {
                    let zeta = if mul_kind { base * raw[i] } else { raw[i] };
                    alpha * zeta + (1.0 - alpha) * eta[i]
                }
                _ => eta[i],
            };
            let value = base + inno;
            if !value.is_finite() || value.abs() > DIVERGENCE_BOUND {
                return Ok(SimOutcome::GuardTripped);
            }
            x[(i, step)] = value;
        }
        for i in 0..d {
            if step > 0 && x[(i, step)].abs() > x[(i, step - 1)].abs() {
                run[i] += 1;
                if run[i] >= MONOTONE_RUN {
                    return Ok(SimOutcome::GuardTripped);
                }
            } else {
                run[i] = 0;
            }
        }
    }
    Ok(SimOutcome::Series(x))
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Solves sigmoid(alpha + beta z) for the intercept matching the target rate.
fn solve_intercept(z: &Array2<f64>, beta: f64, rho: f64) -> Result<f64> {
    let mean_rate = |alpha: f64| {
        z.iter().map(|&v| sigmoid(alpha + beta * v)).sum::<f64>() / z.len() as f64
    };
    let (mut lo, mut hi) = (-1e3, 1e3);
    if mean_rate(lo) > rho || mean_rate(hi) < rho {
        return Err(Error::BisectionBracket);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = mean_rate(mid);
        if (r - rho).abs() <= 1e-6 {
            return Ok(mid);
        }
        if r < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Missingness mask (1 = missing) at expected rate `rho`.
pub fn missing_mask<R: Rng>(
    kind: MissKind,
    rho: f64,
    x: &Array2<f64>,
    pool: Option<&ExogenousPool>,
    rng: &mut R,
) -> Result<Array2<u8>> {
    if !(0.0 < rho && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("missing rate {rho} outside (0,1)")));
    }
    let (d, t) = x.dim();
    let probs: Array2<f64> = match kind {
        MissKind::Mcar => Array2::from_elem((d, t), rho),
        MissKind::Mar => {
            let pool = pool.ok_or_else(|| {
                Error::InvalidArgument("MAR missingness needs an exogenous pool".into())
            })?;
            let z = pool.draw_matrix(d, t, rng)?;
            let alpha = solve_intercept(&z, MISSING_BETA, rho)?;
            z.mapv(|v| sigmoid(alpha + MISSING_BETA * v))
        }
        MissKind::Mnar => {
            let alpha = solve_intercept(x, MISSING_BETA, rho)?;
            x.mapv(|v| sigmoid(alpha + MISSING_BETA * v))
        }
    };
    let mut mask = Array2::zeros((d, t));
    for i in 0..d {
        for s0 in 0..t {
            if rng.gen::<f64>() < probs[(i, s0)] {
                mask[(i, s0)] = 1;
            }
        }
    }
    Ok(mask)
}

/// Replaces masked cells by linear interpolation; edge runs hold the nearest
/// observed value.
pub fn linear_interpolate(x: &Array2<f64>, mask: &Array2<u8>) -> Result<Array2<f64>> {
    if x.dim() != mask.dim() {
        return Err(Error::ShapeMismatch(format!(
            "series {:?} vs mask {:?}",
            x.dim(),
            mask.dim()
        )));
    }
    let (d, t) = x.dim();
    let mut out = x.clone();
    for i in 0..d {
        let observed: Vec<usize> = (0..t).filter(|&s0| mask[(i, s0)] == 0).collect();
        if observed.is_empty() {
            return Err(Error::FullyMasked(i));
        }
        for s0 in 0..t {
            if mask[(i, s0)] == 0 {
                continue;
            }
            let next = observed.partition_point(|&o| o < s0);
            out[(i, s0)] = match (next.checked_sub(1).map(|p| observed[p]), observed.get(next)) {
                (Some(p), Some(&n)) => {
                    let w = (s0 - p) as f64 / (n - p) as f64;
                    x[(i, p)] + (x[(i, n)] - x[(i, p)]) * w
                }
                (Some(p), None) => x[(i, p)],
                (None, Some(&n)) => x[(i, n)],
                (None, None) => unreachable!(),
            };
        }
    }
    Ok(out)
}

/// Blends each variable with its standardized version; alpha = 1 is a full
/// standardization, alpha = 0 the bit-exact identity.
pub fn apply_scale_blend(x: &Array2<f64>, alpha: f64) -> Result<Array2<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("blend alpha {alpha} outside [0,1]")));
    }
    if alpha == 0.0 {
        return Ok(x.clone());
    }
    let (d, t) = x.dim();
    let mut out = x.clone();
    for i in 0..d {
        let row = x.row(i);
        let mean = row.sum() / t as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
        if var <= 0.0 {
            return Err(Error::ZeroPower("scale-blend standardization"));
        }
        let sd = var.sqrt();
        for s0 in 0..t {
            let std = (x[(i, s0)] - mean) / sd;
            out[(i, s0)] = alpha * std + (1.0 - alpha) * x[(i, s0)];
        }
    }
    Ok(out)
}

/// One generated sample: the SCM, its visible series, and the ground truth.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub regime: Regime,
    pub violations: Vec<ViolationConfig>,
    pub level: u8,
    pub index: u32,
    pub seed: u64,
    pub scm: ScmSpec,
    pub x: Array2<f64>,
    pub truth: GroundTruth,
}

impl SampleRecord {
    pub fn violation_label(&self) -> String {
        violation_label(&self.violations)
    }
}

pub fn violation_label(configs: &[ViolationConfig]) -> String {
    if configs.is_empty() {
        "none".to_string()
    } else {
        configs.iter().map(|c| c.id.as_str()).collect::<Vec<_>>().join("+")
    }
}

/// Generates one sample end to end; retries the whole SCM on guard trips.
pub fn make_sample(
    master_seed: u64,
    configs: &[ViolationConfig],
    regime: &Regime,
    index: u32,
    pool: Option<&ExogenousPool>,
) -> Result<SampleRecord> {
    let opts = resolve_options(configs, regime)?;
    let label = violation_label(configs);
    let level = configs.first().map(|c| c.level).unwrap_or(0);
    let mut rng: ChaCha12Rng = rng::sample_stream(master_seed, &label, &regime.id(), level, index);
    let t = opts.series_length();
    for _ in 0..RETRY_BUDGET {
        let spec = sample_scm(regime, &opts, &mut rng)?;
        let outcome = simulate(&spec, t, &opts.empty, pool, &mut rng)?;
        let SimOutcome::Series(full) = outcome else {
            continue;
        };
        let d_vis = spec.d_visible();
        let mut x = full.slice(s![..d_vis, ..]).to_owned();
        if let Some((kind, snr)) = opts.obs {
            let mut kernel = NoiseKernel::new(kind, d_vis, t, pool, &mut rng)?;
            let zeta = noise::build_noise_matrix(&mut kernel, &x, &mut rng);
            let scaled = noise::scale_to_snr(&x, &zeta, snr)?;
            x += &scaled;
        }
        if let Some((mk, rho)) = opts.missing {
            let mask = missing_mask(mk, rho, &x, pool, &mut rng)?;
            x = linear_interpolate(&x, &mask)?;
        }
        if let Some(alpha) = opts.scale_alpha {
            x = apply_scale_blend(&x, alpha)?;
        }
        let truth = scm::ground_truth(&spec);
        return Ok(SampleRecord {
            regime: *regime,
            violations: configs.to_vec(),
            level,
            index,
            seed: master_seed,
            scm: spec,
            x,
            truth,
        });
    }
    Err(Error::RetryExhausted {
        budget: RETRY_BUDGET,
        context: format!("sample {label}/{}/{level}/{index}", regime.id()),
    })
}

/// Full generation request: violation names ('+' composes, "none" is the
/// unviolated reference), levels, regimes, and per-cell sample count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Plan {
    pub violations: Vec<String>,
    pub levels: Vec<u8>,
    pub regimes: Vec<Regime>,
    pub count: u32,
    pub seed: u64,
    #[serde(default)]
    pub schedule_variant: ScheduleVariant,
    #[serde(default)]
    pub exogenous_path: Option<String>,
}

impl Plan {
    pub fn protocol_default(violations: Vec<String>, count: u32, seed: u64) -> Self {
        Self {
            violations,
            levels: vec![1, 2, 3, 4, 5],
            regimes: Regime::default_grid(),
            count,
            seed,
            schedule_variant: ScheduleVariant::Default,
            exogenous_path: None,
        }
    }
}

/// Expanded (violation set, regime) cell of a plan.
#[derive(Debug, Clone)]
pub struct PlanCell {
    pub label: String,
    pub configs: Vec<ViolationConfig>,
    pub regime: Regime,
    pub level: u8,
}

fn parse_violation_ids(name: &str) -> Result<Vec<ViolationId>> {
    if name == "none" {
        return Ok(Vec::new());
    }
    name.split('+').map(ViolationId::parse).collect()
}

/// Expands a plan into cells; "none" runs once per regime at level 0.
pub fn expand_plan(plan: &Plan) -> Result<Vec<PlanCell>> {
    let mut cells = Vec::new();
    for name in &plan.violations {
        let ids = parse_violation_ids(name)?;
        let mut regimes = plan.regimes.clone();
        for &id in &ids {
            regimes = violations::compatible_regimes(id, &regimes);
        }
        let levels: Vec<u8> = if ids.is_empty() { vec![0] } else { plan.levels.clone() };
        for &level in &levels {
            let configs = if ids.is_empty() {
                Vec::new()
            } else {
                violations::compose(
                    ids.iter()
                        .map(|&id| violations::resolve(id, level, plan.schedule_variant))
                        .collect::<Result<Vec<_>>>()?,
                )?
            };
            let label = violation_label(&configs);
            for regime in &regimes {
                cells.push(PlanCell {
                    label: label.clone(),
                    configs: configs.clone(),
                    regime: *regime,
                    level,
                });
            }
        }
    }
    Ok(cells)
}

fn plan_needs_pool(cells: &[PlanCell]) -> bool {
    cells.iter().any(|c| {
        c.configs.iter().any(|v| {
            matches!(v.id, ViolationId::ObsReal | ViolationId::InnoReal | ViolationId::Mar)
        })
    })
}

fn max_series_length(plan: &Plan, cells: &[PlanCell]) -> Result<usize> {
    let mut longest = 2;
    for cell in cells {
        let opts = resolve_options(&cell.configs, &cell.regime)?;
        longest = longest.max(opts.series_length());
    }
    let _ = plan;
    Ok(longest)
}

/// Loads or synthesizes the exogenous pool a plan needs; None when unused.
pub fn resolve_pool(plan: &Plan, cells: &[PlanCell]) -> Result<Option<ExogenousPool>> {
    if let Some(path) = &plan.exogenous_path {
        return Ok(Some(ExogenousPool::from_csv(std::path::Path::new(path), DEFAULT_CUTOFF)?));
    }
    if !plan_needs_pool(cells) {
        return Ok(None);
    }
    let len = max_series_length(plan, cells)?;
    Ok(Some(ExogenousPool::standin(plan.seed, STANDIN_CHANNELS, len, DEFAULT_CUTOFF)))
}

/// Generates every sample of a plan; deterministic in the seed and
/// independent of worker count.
pub fn generate_batch(plan: &Plan) -> Result<Vec<SampleRecord>> {
    let cells = expand_plan(plan)?;
    let pool = resolve_pool(plan, &cells)?;
    let tasks: Vec<(&PlanCell, u32)> = cells
        .iter()
        .flat_map(|cell| (0..plan.count).map(move |index| (cell, index)))
        .collect();
    tasks
        .par_iter()
        .map(|(cell, index)| {
            make_sample(plan.seed, &cell.configs, &cell.regime, *index, pool.as_ref())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::violations::resolve;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn test_rng(tag: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(tag)
    }

    fn plain_regime() -> Regime {
        Regime::new(5, 3, 250, 0.075, 0.0)
    }

    fn opts_for(regime: &Regime, configs: &[ViolationConfig]) -> GenOptions {
        resolve_options(configs, regime).unwrap()
    }

    #[test]
    fn empty_scm_gives_iid_standard_normal() {
        let d = 4;
        let spec = ScmSpec::linear(d, 2, Array3::zeros((d, d, 2)), Array2::zeros((d, d)));
        let mut rng = test_rng(7);
        let SimOutcome::Series(x) = simulate(&spec, 1000, &[], None, &mut rng).unwrap() else {
            panic!("guard tripped on empty SCM")
        };
        for i in 0..d {
            let mean = x.row(i).sum() / 1000.0;
            assert!(mean.abs() < 0.12, "mean {mean}");
            let var = x.row(i).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1000.0;
            assert!((var - 1.0).abs() < 0.15, "var {var}");
        }
    }

    #[test]
    fn make_sample_is_deterministic() {
        let regime = plain_regime();
        let configs = vec![resolve(ViolationId::ObsAdd, 2, ScheduleVariant::Default).unwrap()];
        let a = make_sample(11, &configs, &regime, 3, None).unwrap();
        let b = make_sample(11, &configs, &regime, 3, None).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.truth, b.truth);
        let c = make_sample(11, &configs, &regime, 4, None).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn guard_trips_on_unstable_coefficients() {
        let d = 2;
        let mut a = Array3::zeros((d, d, 1));
        a[(0, 0, 0)] = 1.3;
        let spec = ScmSpec::linear(d, 1, a, Array2::zeros((d, d)));
        let mut rng = test_rng(3);
        assert!(matches!(
            simulate(&spec, 500, &[], None, &mut rng).unwrap(),
            SimOutcome::GuardTripped
        ));
    }

    #[test]
    fn faith_lag_injection_builds_cancelling_structure() {
        let regime = plain_regime();
        let configs = vec![resolve(ViolationId::FaithLag, 5, ScheduleVariant::Default).unwrap()];
        let opts = opts_for(&regime, &configs);
        let mut rng = test_rng(5);
        for _ in 0..50 {
            let spec = sample_scm(&regime, &opts, &mut rng).unwrap();
            // locate the designed rows via the fixed 0.5 mediator edge
            let mut found = None;
            for i in 0..regime.d {
                for k in 0..regime.d {
                    if i != k && spec.a[(i, k, 0)] == 0.5 {
                        found = Some((i, k));
                    }
                }
            }
            let (i, k) = found.expect("mediator edge present");
            let j = (0..regime.d)
                .find(|&j| j != i && j != k && spec.a[(k, j, 0)] != 0.0)
                .expect("source edge present");
            let two_v = spec.a[(k, j, 0)];
            assert!((0.6..1.0).contains(&two_v));
            assert_abs_diff_eq!(spec.a[(i, j, 1)], -two_v / 2.0, epsilon = 1e-12);
            // rows i and k carry no other parents in A or B
            for jj in 0..regime.d {
                for lag in 0..regime.l {
                    if !((jj == k && lag == 0) || (jj == j && lag == 1)) {
                        assert_eq!(spec.a[(i, jj, lag)], 0.0);
                    }
                    if !(jj == j && lag == 0) {
                        assert_eq!(spec.a[(k, jj, lag)], 0.0);
                    }
                }
                assert_eq!(spec.b[(i, jj)], 0.0);
                assert_eq!(spec.b[(k, jj)], 0.0);
            }
        }
    }

    #[test]
    fn stat_segments_sit_at_published_change_points() {
        let regime = Regime::new(5, 3, 1000, 0.15, 0.0);
        let configs = vec![resolve(ViolationId::Stat, 3, ScheduleVariant::Default).unwrap()];
        let opts = opts_for(&regime, &configs);
        let mut rng = test_rng(9);
        let spec = sample_scm(&regime, &opts, &mut rng).unwrap();
        let starts: Vec<usize> = spec.a_segments.iter().map(|(s0, _)| *s0).collect();
        assert_eq!(starts, vec![250, 500, 750]);
        assert!(spec.a_segments.iter().any(|(_, seg)| seg != &spec.a));
        // union ground truth covers links that only segments carry
        let truth = scm::ground_truth(&spec);
        let mut only_segment = 0;
        for (idx, &v) in truth.lwcg.indexed_iter() {
            if v == 1 && spec.a[idx] == 0.0 {
                only_segment += 1;
            }
        }
        assert!(only_segment > 0, "expected union-only links");
    }

    #[test]
    fn coef_segments_perturb_without_changing_support() {
        let regime = plain_regime();
        let configs = vec![resolve(ViolationId::Coef, 5, ScheduleVariant::Default).unwrap()];
        let opts = opts_for(&regime, &configs);
        let mut rng = test_rng(13);
        let spec = sample_scm(&regime, &opts, &mut rng).unwrap();
        let starts: Vec<usize> = spec.a_segments.iter().map(|(s0, _)| *s0).collect();
        assert_eq!(starts, vec![50, 100, 150, 200]);
        for (_, seg) in &spec.a_segments {
            for (idx, &v) in seg.indexed_iter() {
                assert_eq!(v != 0.0, spec.a[idx] != 0.0, "support must not move");
                if v != 0.0 {
                    assert!((v - spec.a[idx]).abs() < 4.0 * 0.5 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn empty_intervals_leave_pure_innovations() {
        let d = 3;
        let l = 1;
        let mut a = Array3::zeros((d, d, l));
        for i in 0..d {
            a[(i, i, 0)] = 0.5;
        }
        let spec = ScmSpec::linear(d, l, a, Array2::zeros((d, d)));
        let zero_spec =
            ScmSpec::linear(d, l, Array3::zeros((d, d, l)), Array2::zeros((d, d)));
        let empty = [(40usize, 100usize)];
        let mut rng1 = test_rng(21);
        let mut rng2 = test_rng(21);
        let SimOutcome::Series(with) = simulate(&spec, 250, &empty, None, &mut rng1).unwrap()
        else {
            panic!()
        };
        let SimOutcome::Series(inno) = simulate(&zero_spec, 250, &[], None, &mut rng2).unwrap()
        else {
            panic!()
        };
        for t in 40..100 {
            for i in 0..d {
                assert_eq!(with[(i, t)], inno[(i, t)], "t={t}");
            }
        }
        // parents resume outside the interval
        let resumed = (100..250).any(|t| (0..d).any(|i| with[(i, t)] != inno[(i, t)]));
        assert!(resumed);
    }

    #[test]
    fn mcar_rate_hits_target() {
        let x = Array2::zeros((100, 10_000));
        let mut rng = test_rng(2);
        let mask = missing_mask(MissKind::Mcar, 0.2, &x, None, &mut rng).unwrap();
        let rate = mask.iter().map(|&m| m as f64).sum::<f64>() / 1e6;
        assert!((rate - 0.2).abs() < 0.002, "rate {rate}");
    }

    #[test]
    fn mnar_skews_missing_cells_upward_and_hits_rate() {
        let mut rng = test_rng(4);
        let x = Array2::from_shape_fn((20, 5000), |_| normal(&mut rng));
        let mask = missing_mask(MissKind::Mnar, 0.3, &x, None, &mut rng).unwrap();
        let rate = mask.iter().map(|&m| m as f64).sum::<f64>() / 1e5;
        assert!((rate - 0.3).abs() < 0.01, "rate {rate}");
        let (mut miss_sum, mut miss_n, mut obs_sum, mut obs_n) = (0.0, 0, 0.0, 0);
        for (idx, &m) in mask.indexed_iter() {
            if m == 1 {
                miss_sum += x[idx];
                miss_n += 1;
            } else {
                obs_sum += x[idx];
                obs_n += 1;
            }
        }
        assert!(miss_sum / miss_n as f64 > obs_sum / obs_n as f64);
    }

    #[test]
    fn mar_rate_hits_target_with_pool() {
        let pool = ExogenousPool::standin(77, 8, 4000, DEFAULT_CUTOFF);
        let x = Array2::zeros((25, 4000));
        let mut rng = test_rng(6);
        let mask = missing_mask(MissKind::Mar, 0.475, &x, Some(&pool), &mut rng).unwrap();
        let rate = mask.iter().map(|&m| m as f64).sum::<f64>() / 1e5;
        assert!((rate - 0.475).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn interpolation_examples() {
        let x = Array2::from_shape_vec((1, 3), vec![1.0, -5.0, 3.0]).unwrap();
        let mask = Array2::from_shape_vec((1, 3), vec![0, 1, 0]).unwrap();
        let out = linear_interpolate(&x, &mask).unwrap();
        assert_eq!(out, Array2::from_shape_vec((1, 3), vec![1.0, 2.0, 3.0]).unwrap());

        let x = Array2::from_shape_vec((1, 4), vec![9.0, 9.0, 5.0, 1.0]).unwrap();
        let mask = Array2::from_shape_vec((1, 4), vec![1, 1, 0, 0]).unwrap();
        let out = linear_interpolate(&x, &mask).unwrap();
        assert_eq!(out, Array2::from_shape_vec((1, 4), vec![5.0, 5.0, 5.0, 1.0]).unwrap());

        let x = Array2::from_shape_vec((1, 3), vec![0.25, 0.5, 0.125]).unwrap();
        let mask = Array2::zeros((1, 3));
        assert_eq!(linear_interpolate(&x, &mask).unwrap(), x);

        let all = Array2::from_elem((1, 3), 1u8);
        assert!(matches!(linear_interpolate(&x, &all), Err(Error::FullyMasked(0))));
    }

    #[test]
    fn scale_blend_examples() {
        let x = Array2::from_shape_vec((1, 4), vec![0.0, 4.0, 0.0, 4.0]).unwrap();
        assert_eq!(apply_scale_blend(&x, 0.0).unwrap(), x);
        let full = apply_scale_blend(&x, 1.0).unwrap();
        let mean = full.row(0).sum() / 4.0;
        let var = full.row(0).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-9);
        // mean 2, sd 2 blended at 0.5 lands on mean 1, sd 1.5
        let half = apply_scale_blend(&x, 0.5).unwrap();
        let mean = half.row(0).sum() / 4.0;
        let var = half.row(0).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var.sqrt(), 1.5, epsilon = 1e-12);
        let flat = Array2::from_elem((1, 4), 3.0);
        assert!(apply_scale_blend(&flat, 0.5).is_err());
        assert_eq!(apply_scale_blend(&flat, 0.0).unwrap(), flat);
    }

    #[test]
    fn conf_lag_hides_the_extra_variable() {
        let regime = plain_regime();
        let configs = vec![resolve(ViolationId::ConfLag, 4, ScheduleVariant::Default).unwrap()];
        let rec = make_sample(31, &configs, &regime, 0, None).unwrap();
        assert_eq!(rec.scm.d, regime.d + 1);
        assert_eq!(rec.scm.hidden_tail, 1);
        assert_eq!(rec.x.nrows(), regime.d);
        assert_eq!(rec.truth.lwcg.dim(), (regime.d, regime.d, regime.l));
        // confounder links are positive and strong
        let c = regime.d;
        for i in 0..regime.d {
            for k in 0..regime.l {
                for &v in &[rec.scm.a[(i, c, k)], rec.scm.a[(c, i, k)]] {
                    assert!(v == 0.0 || (0.8..0.9).contains(&v));
                }
            }
        }
    }

    #[test]
    fn conf_inst_shares_hidden_parents_at_high_levels() {
        let regime = Regime::new(5, 3, 250, 0.075, 0.1);
        let configs = vec![resolve(ViolationId::ConfInst, 5, ScheduleVariant::Default).unwrap()];
        let opts = opts_for(&regime, &configs);
        let mut rng = test_rng(41);
        let mut shared = 0;
        for _ in 0..1000 {
            let spec = sample_scm(&regime, &opts, &mut rng).unwrap();
            let conf = spec.inst_confounders.as_ref().unwrap();
            let any_pair = (0..CONF_INST_N)
                .any(|n| (0..regime.d).filter(|&i| conf[(i, n)] != 0.0).count() >= 2);
            if any_pair {
                shared += 1;
            }
        }
        assert!(shared > 900, "shared hidden parent pairs in {shared}/1000");
    }

    #[test]
    fn unequal_variances_persist_per_variable() {
        let regime = plain_regime();
        let configs = vec![resolve(ViolationId::InnoVar, 5, ScheduleVariant::Default).unwrap()];
        let opts = opts_for(&regime, &configs);
        let mut rng = test_rng(43);
        let spec = sample_scm(&regime, &opts, &mut rng).unwrap();
        let InnovationSpec::UnequalVar { sigma2 } = &spec.noise_cfg else { panic!() };
        assert_eq!(sigma2.len(), regime.d);
        for &s2 in sigma2 {
            assert!((0.0..=0.2).contains(&s2) || (1.8..=2.0).contains(&s2), "sigma2 {s2}");
        }
    }

    #[test]
    fn length_violation_sets_series_length_from_schedule() {
        let mut regime = plain_regime();
        regime.t = 0;
        let configs = vec![resolve(ViolationId::Length, 1, ScheduleVariant::Default).unwrap()];
        let rec = make_sample(51, &configs, &regime, 0, None).unwrap();
        assert_eq!(rec.x.ncols(), 76);
        let configs = vec![resolve(ViolationId::Length, 5, ScheduleVariant::Default).unwrap()];
        let rec = make_sample(51, &configs, &regime, 0, None).unwrap();
        assert_eq!(rec.x.ncols(), 6);
    }

    #[test]
    fn expand_plan_counts_cells() {
        let plan = Plan::protocol_default(vec!["obs_add".into()], 100, 1);
        let cells = expand_plan(&plan).unwrap();
        assert_eq!(cells.len(), 5 * 16);
        let plan = Plan::protocol_default(vec!["faith_inst".into()], 100, 1);
        assert_eq!(expand_plan(&plan).unwrap().len(), 5 * 8);
        let plan = Plan::protocol_default(vec!["length".into()], 100, 1);
        assert_eq!(expand_plan(&plan).unwrap().len(), 5 * 8);
        let plan = Plan::protocol_default(vec!["none".into()], 100, 1);
        assert_eq!(expand_plan(&plan).unwrap().len(), 16);
        let plan = Plan::protocol_default(vec!["inno_com+obs_com".into()], 100, 1);
        let cells = expand_plan(&plan).unwrap();
        assert_eq!(cells.len(), 5 * 16);
        assert_eq!(cells[0].label, "inno_com+obs_com");
    }

    #[test]
    fn generate_batch_deterministic_and_shaped() {
        let plan = Plan {
            violations: vec!["obs_add".into(), "none".into()],
            levels: vec![1, 5],
            regimes: vec![plain_regime(), Regime::new(5, 3, 250, 0.15, 0.1)],
            count: 3,
            seed: 99,
            schedule_variant: ScheduleVariant::Default,
            exogenous_path: None,
        };
        let a = generate_batch(&plan).unwrap();
        let b = generate_batch(&plan).unwrap();
        assert_eq!(a.len(), 2 * 2 * 3 + 2 * 3);
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.x, rb.x);
            assert_eq!(ra.violation_label(), rb.violation_label());
        }
        for r in &a {
            assert!(r.x.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn linear_series_remains_stable_across_halves() {
        let regime = Regime::new(5, 3, 1000, 0.15, 0.0);
        let configs: Vec<ViolationConfig> = Vec::new();
        let mut ok = 0;
        for index in 0..50 {
            let rec = make_sample(7, &configs, &regime, index, None).unwrap();
            // pre-noise series: X itself, no obs transforms on "none"
            let t = rec.x.ncols();
            let mut pass = true;
            for i in 0..rec.x.nrows() {
                let half = t / 2;
                let var = |lo: usize, hi: usize| {
                    let seg = rec.x.slice(s![i, lo..hi]);
                    let m = seg.sum() / (hi - lo) as f64;
                    seg.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (hi - lo) as f64
                };
                let (v1, v2) = (var(0, half), var(half, t));
                if v2 > 3.0 * v1 && v2 - v1 > 0.5 {
                    pass = false;
                }
            }
            if pass {
                ok += 1;
            }
        }
        assert!(ok >= 48, "stable halves in {ok}/50");
    }

    #[test]
    fn divergence_guard_holds_on_emitted_series() {
        let regime = Regime::new(7, 4, 250, 0.15, 0.1);
        let configs = vec![resolve(ViolationId::NlComp, 5, ScheduleVariant::Default).unwrap()];
        for index in 0..20 {
            let rec = make_sample(23, &configs, &regime, index, None).unwrap();
            // obs transforms may exceed the bound; the simulated core may not.
            assert!(rec.x.iter().all(|v| v.is_finite()));
        }
    }
}
