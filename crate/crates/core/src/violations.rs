//! Canonical catalog of the 33 assumption violations, their level 1..5
//! parameter schedules, regime compatibility, and composition rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funclib::BETA_INTERVALS;
use crate::noise::{NgDist, NoiseKind};
use crate::scm::Regime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationId {
    ObsAdd,
    ObsMul,
    ObsTime,
    ObsAuto,
    ObsCom,
    ObsShock,
    ObsReal,
    ConfInst,
    ConfLag,
    FaithInst,
    FaithLag,
    FaithZero,
    NlMono,
    NlTrend,
    NlRbf,
    NlComp,
    InnoMul,
    InnoTime,
    InnoAuto,
    InnoCom,
    InnoShock,
    InnoReal,
    InnoUni,
    InnoWeib,
    InnoVar,
    Coef,
    Stat,
    Length,
    Mcar,
    Mar,
    Mnar,
    Empty,
    Scale,
}

use ViolationId::*;

pub const ALL_IDS: [ViolationId; 33] = [
    ObsAdd, ObsMul, ObsTime, ObsAuto, ObsCom, ObsShock, ObsReal, ConfInst, ConfLag, FaithInst,
    FaithLag, FaithZero, NlMono, NlTrend, NlRbf, NlComp, InnoMul, InnoTime, InnoAuto, InnoCom,
    InnoShock, InnoReal, InnoUni, InnoWeib, InnoVar, Coef, Stat, Length, Mcar, Mar, Mnar, Empty,
    Scale,
];

impl ViolationId {
    pub fn as_str(self) -> &'static str {
        match self {
            ObsAdd => "obs_add",
            ObsMul => "obs_mul",
            ObsTime => "obs_time",
            ObsAuto => "obs_auto",
            ObsCom => "obs_com",
            ObsShock => "obs_shock",
            ObsReal => "obs_real",
            ConfInst => "conf_inst",
            ConfLag => "conf_lag",
            FaithInst => "faith_inst",
            FaithLag => "faith_lag",
            FaithZero => "faith_zero",
            NlMono => "nl_mono",
            NlTrend => "nl_trend",
            NlRbf => "nl_rbf",
            NlComp => "nl_comp",
            InnoMul => "inno_mul",
            InnoTime => "inno_time",
            InnoAuto => "inno_auto",
            InnoCom => "inno_com",
            InnoShock => "inno_shock",
            InnoReal => "inno_real",
            InnoUni => "inno_uni",
            InnoWeib => "inno_weib",
            InnoVar => "inno_var",
            Coef => "coef",
            Stat => "stat",
            Length => "length",
            Mcar => "mcar",
            Mar => "mar",
            Mnar => "mnar",
            Empty => "empty",
            Scale => "scale",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ALL_IDS
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownViolation(s.to_string()))
    }

    /// Observational noise kind, for obs_* ids.
    pub fn obs_kind(self) -> Option<NoiseKind> {
        Some(match self {
            ObsAdd => NoiseKind::Add,
            ObsMul => NoiseKind::Mul,
            ObsTime => NoiseKind::Time,
            ObsAuto => NoiseKind::Auto,
            ObsCom => NoiseKind::Com,
            ObsShock => NoiseKind::Shock,
            ObsReal => NoiseKind::Real,
            _ => return None,
        })
    }

    /// Structured innovation kind, for the blended inno_* ids.
    pub fn inno_kind(self) -> Option<NoiseKind> {
        Some(match self {
            InnoMul => NoiseKind::Mul,
            InnoTime => NoiseKind::Time,
            InnoAuto => NoiseKind::Auto,
            InnoCom => NoiseKind::Com,
            InnoShock => NoiseKind::Shock,
            InnoReal => NoiseKind::Real,
            _ => return None,
        })
    }

    pub fn ng_dist(self) -> Option<NgDist> {
        match self {
            InnoUni => Some(NgDist::Uniform),
            InnoWeib => Some(NgDist::Weibull),
            _ => None,
        }
    }

    fn slot(self) -> Slot {
        match self {
            ObsAdd | ObsMul | ObsTime | ObsAuto | ObsCom | ObsShock | ObsReal => Slot::Obs,
            ConfInst => Slot::ConfInst,
            ConfLag => Slot::ConfLag,
            FaithInst | FaithLag | FaithZero => Slot::Faithfulness,
            NlMono | NlTrend | NlRbf | NlComp => Slot::Nonlinearity,
            InnoMul | InnoTime | InnoAuto | InnoCom | InnoShock | InnoReal | InnoUni | InnoWeib
            | InnoVar => Slot::Innovation,
            Coef | Stat => Slot::CoefficientDrift,
            Length => Slot::Length,
            Mcar | Mar | Mnar => Slot::Missing,
            Empty => Slot::Empty,
            Scale => Slot::Scale,
        }
    }

    /// Application order inside a composite: generation-time violations
    /// before post-hoc transforms.
    fn order_rank(self) -> u8 {
        match self.slot() {
            Slot::Length => 0,
            Slot::Faithfulness => 1,
            Slot::ConfLag => 2,
            Slot::ConfInst => 3,
            Slot::Nonlinearity => 4,
            Slot::CoefficientDrift => 5,
            Slot::Empty => 6,
            Slot::Innovation => 7,
            Slot::Obs => 8,
            Slot::Missing => 9,
            Slot::Scale => 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Obs,
    Innovation,
    Nonlinearity,
    Faithfulness,
    Missing,
    CoefficientDrift,
    Empty,
    Length,
    Scale,
    ConfInst,
    ConfLag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScheduleVariant {
    #[default]
    #[serde(rename = "default")]
    Default,
    #[serde(rename = "appendix")]
    Appendix,
}

impl ScheduleVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleVariant::Default => "default",
            ScheduleVariant::Appendix => "appendix",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(ScheduleVariant::Default),
            "appendix" => Ok(ScheduleVariant::Appendix),
            other => Err(Error::Config(format!("unknown schedule variant `{other}`"))),
        }
    }
}

/// Resolved level parameter of one violation.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Snr(f64),
    LinkProb(f64),
    Distortion(f64),
    CoefMagnitude(f64, f64),
    BetaIntervals { lo: (f64, f64), hi: (f64, f64) },
    SplinePoints(usize),
    BlendAlpha(f64),
    VarIntervals { lo: (f64, f64), hi: (f64, f64) },
    CoefDelta(f64),
    NumChanges(usize),
    SeriesLength(usize),
    MissingRate(f64),
    EmptyIntervals { t250: [(usize, usize); 2], t1000: [(usize, usize); 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationConfig {
    pub id: ViolationId,
    pub level: u8,
    pub param: Param,
}

// Table defaults (per-level, index = level - 1).
const SNR_DEFAULT: [f64; 5] = [1.1, 0.8375, 0.575, 0.3125, 0.05];
const SNR_APPENDIX: [f64; 5] = [10.0, 5.0, 1.0, 0.5, 0.1];
const CONF_P_DEFAULT: [f64; 5] = [0.135, 0.27625, 0.4175, 0.55875, 0.7];
const CONF_INST_P_APPENDIX: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
const CONF_LAG_P_APPENDIX: [f64; 5] = [0.1, 0.2, 0.5, 0.7, 0.9];
const FAITH_D: [f64; 5] = [0.2, 0.15, 0.1, 0.05, 0.0];
const FAITH_ZERO_INTERVALS: [(f64, f64); 5] = [
    (0.12, 0.24),
    (0.0975, 0.1925),
    (0.075, 0.145),
    (0.0525, 0.0975),
    (0.03, 0.05),
];
const TREND_POINTS_DEFAULT: [usize; 5] = [12, 10, 8, 6, 4];
const TREND_POINTS_APPENDIX: [usize; 5] = [25, 15, 10, 6, 4];
const RBF_P_DEFAULT: [f64; 5] = [0.425, 0.56875, 0.7125, 0.85625, 1.0];
const COMP_P_DEFAULT: [f64; 5] = [0.05, 0.2875, 0.525, 0.7625, 1.0];
const NL_P_APPENDIX: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
const INNO_MUL_ALPHA: [f64; 5] = [0.91, 0.93, 0.95, 0.97, 0.99];
const INNO_TIME_ALPHA: [f64; 5] = [0.8, 0.85, 0.9, 0.95, 1.0];
const INNO_AUTO_ALPHA: [f64; 5] = [0.35, 0.5, 0.65, 0.8, 0.95];
const INNO_COM_ALPHA: [f64; 5] = [0.475, 0.60625, 0.7375, 0.86875, 1.0];
const INNO_SHOCK_ALPHA: [f64; 5] = [0.8, 0.85, 0.9, 0.95, 1.0];
const INNO_REAL_ALPHA: [f64; 5] = [0.8, 0.85, 0.9, 0.95, 1.0];
const INNO_UNI_ALPHA: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 1.0];
const INNO_WEIB_ALPHA: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
const INNO_VAR_INTERVALS: [((f64, f64), (f64, f64)); 5] = [
    ((0.55, 0.75), (1.25, 1.45)),
    ((0.4125, 0.6125), (1.3875, 1.5875)),
    ((0.275, 0.475), (1.525, 1.725)),
    ((0.1375, 0.3375), (1.6625, 1.8625)),
    ((0.0, 0.2), (1.8, 2.0)),
];
const COEF_DELTA: [f64; 5] = [0.275, 0.33125, 0.3875, 0.44375, 0.5];
const STAT_CHANGES: [usize; 5] = [1, 2, 3, 4, 5];
const LENGTH_T: [usize; 5] = [76, 58, 41, 23, 6];
const MISSING_RHO: [f64; 5] = [0.2, 0.3375, 0.475, 0.6125, 0.75];
const SCALE_ALPHA: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
const EMPTY_T250: [[(usize, usize); 2]; 5] = [
    [(40, 100), (150, 210)],
    [(31, 106), (144, 219)],
    [(23, 111), (139, 227)],
    [(14, 117), (133, 236)],
    [(6, 122), (128, 244)],
];
const EMPTY_T1000: [[(usize, usize); 2]; 5] = [
    [(160, 400), (600, 840)],
    [(124, 424), (576, 876)],
    [(92, 444), (556, 908)],
    [(56, 468), (532, 944)],
    [(24, 488), (512, 976)],
];

/// Change points of the nonstationarity violation; the published step lists
/// for T in {250, 1000} follow no single rounding rule and are hard-coded.
pub fn stat_change_points(t: usize, n: usize) -> Vec<usize> {
    match (t, n) {
        (250, 1) => vec![125],
        (250, 2) => vec![83, 166],
        (250, 3) => vec![63, 126, 187],
        (250, 4) => vec![50, 100, 150, 200],
        (250, 5) => vec![41, 82, 122, 163, 205],
        (1000, 1) => vec![500],
        (1000, 2) => vec![333, 666],
        (1000, 3) => vec![250, 500, 750],
        (1000, 4) => vec![200, 400, 600, 800],
        (1000, 5) => vec![166, 333, 500, 666, 833],
        _ => (1..=n).map(|i| t * i / (n + 1)).collect(),
    }
}

/// Coefficient-drift change points: four resamples at i*T/5.
pub fn coef_change_points(t: usize) -> Vec<usize> {
    (1..=4).map(|i| i * t / 5).collect()
}

/// Empty intervals for a series of length `t`; other lengths scale the
/// T=250 table proportionally.
pub fn empty_intervals(param: &Param, t: usize) -> Vec<(usize, usize)> {
    let Param::EmptyIntervals { t250, t1000 } = param else {
        panic!("empty_intervals called on {param:?}");
    };
    match t {
        250 => t250.to_vec(),
        1000 => t1000.to_vec(),
        _ => t250
            .iter()
            .map(|&(a, b)| ((a * t + 125) / 250, (b * t + 125) / 250))
            .collect(),
    }
}

pub fn resolve(id: ViolationId, level: u8, variant: ScheduleVariant) -> Result<ViolationConfig> {
    if !(1..=5).contains(&level) {
        return Err(Error::Config(format!("level must be 1..5, got {level}")));
    }
    let k = (level - 1) as usize;
    let appendix = variant == ScheduleVariant::Appendix;
    let param = match id {
        ObsAdd | ObsMul | ObsTime | ObsAuto | ObsCom | ObsShock | ObsReal => {
            Param::Snr(if appendix { SNR_APPENDIX[k] } else { SNR_DEFAULT[k] })
        }
        ConfInst => Param::LinkProb(if appendix { CONF_INST_P_APPENDIX[k] } else { CONF_P_DEFAULT[k] }),
        ConfLag => Param::LinkProb(if appendix { CONF_LAG_P_APPENDIX[k] } else { CONF_P_DEFAULT[k] }),
        FaithInst | FaithLag => Param::Distortion(FAITH_D[k]),
        FaithZero => {
            let (lo, hi) = FAITH_ZERO_INTERVALS[k];
            Param::CoefMagnitude(lo, hi)
        }
        NlMono => {
            let (lo, hi) = BETA_INTERVALS[k];
            Param::BetaIntervals { lo, hi }
        }
        NlTrend => Param::SplinePoints(if appendix { TREND_POINTS_APPENDIX[k] } else { TREND_POINTS_DEFAULT[k] }),
        NlRbf => Param::LinkProb(if appendix { NL_P_APPENDIX[k] } else { RBF_P_DEFAULT[k] }),
        NlComp => Param::LinkProb(if appendix { NL_P_APPENDIX[k] } else { COMP_P_DEFAULT[k] }),
        InnoMul => Param::BlendAlpha(INNO_MUL_ALPHA[k]),
        InnoTime => Param::BlendAlpha(INNO_TIME_ALPHA[k]),
        InnoAuto => Param::BlendAlpha(INNO_AUTO_ALPHA[k]),
        InnoCom => Param::BlendAlpha(INNO_COM_ALPHA[k]),
        InnoShock => Param::BlendAlpha(INNO_SHOCK_ALPHA[k]),
        InnoReal => Param::BlendAlpha(INNO_REAL_ALPHA[k]),
        InnoUni => Param::BlendAlpha(INNO_UNI_ALPHA[k]),
        InnoWeib => Param::BlendAlpha(INNO_WEIB_ALPHA[k]),
        InnoVar => {
            let (lo, hi) = INNO_VAR_INTERVALS[k];
            Param::VarIntervals { lo, hi }
        }
        Coef => Param::CoefDelta(COEF_DELTA[k]),
        Stat => Param::NumChanges(STAT_CHANGES[k]),
        Length => Param::SeriesLength(LENGTH_T[k]),
        Mcar | Mar | Mnar => Param::MissingRate(MISSING_RHO[k]),
        Empty => Param::EmptyIntervals { t250: EMPTY_T250[k], t1000: EMPTY_T1000[k] },
        Scale => Param::BlendAlpha(SCALE_ALPHA[k]),
    };
    Ok(ViolationConfig { id, level, param })
}

/// Regimes a violation can run on: instantaneous-only violations need
/// p_inst > 0; the series-length violation removes T from the regime axis.
pub fn compatible_regimes(id: ViolationId, grid: &[Regime]) -> Vec<Regime> {
    match id {
        FaithInst | ConfInst => grid.iter().copied().filter(|r| r.p_inst > 0.0).collect(),
        Length => {
            let mut out: Vec<Regime> = Vec::new();
            for r in grid {
                let mut stripped = *r;
                stripped.t = 0;
                if !out.iter().any(|o| o == &stripped) {
                    out.push(stripped);
                }
            }
            out
        }
        _ => grid.to_vec(),
    }
}

/// Validates a composite and returns it in application order.
pub fn compose(configs: Vec<ViolationConfig>) -> Result<Vec<ViolationConfig>> {
    let mut seen: Vec<(Slot, ViolationId)> = Vec::new();
    for c in &configs {
        let slot = c.id.slot();
        if let Some((_, other)) = seen.iter().find(|(s, _)| *s == slot) {
            return Err(Error::ConflictingViolations(
                other.as_str().to_string(),
                c.id.as_str().to_string(),
            ));
        }
        seen.push((slot, c.id));
    }
    let mut ordered = configs;
    ordered.sort_by_key(|c| (c.id.order_rank(), c.id));
    Ok(ordered)
}

/// Printable parameter name of a violation's schedule row.
fn param_name(id: ViolationId) -> &'static str {
    match id {
        ObsAdd | ObsMul | ObsTime | ObsAuto | ObsCom | ObsShock | ObsReal => "snr",
        ConfInst | ConfLag | NlRbf | NlComp => "p",
        FaithInst | FaithLag => "d",
        FaithZero => "coef_interval",
        NlMono => "beta_interval",
        NlTrend => "n_points",
        InnoMul | InnoTime | InnoAuto | InnoCom | InnoShock | InnoReal | InnoUni | InnoWeib
        | Scale => "alpha",
        InnoVar => "var_interval",
        Coef => "delta",
        Stat => "n_changes",
        Length => "t",
        Mcar | Mar | Mnar => "rho",
        Empty => "intervals",
    }
}

fn param_value(param: &Param) -> String {
    match param {
        Param::Snr(v) | Param::LinkProb(v) | Param::Distortion(v) | Param::BlendAlpha(v)
        | Param::CoefDelta(v) | Param::MissingRate(v) => format!("{v}"),
        Param::CoefMagnitude(a, b) => format!("[{a},{b}]"),
        Param::BetaIntervals { lo, hi } | Param::VarIntervals { lo, hi } => {
            format!("[{},{}]u[{},{}]", lo.0, lo.1, hi.0, hi.1)
        }
        Param::SplinePoints(n) | Param::NumChanges(n) | Param::SeriesLength(n) => format!("{n}"),
        Param::EmptyIntervals { t250, t1000 } => format!(
            "T250:[{},{})+[{},{});T1000:[{},{})+[{},{})",
            t250[0].0, t250[0].1, t250[1].0, t250[1].1,
            t1000[0].0, t1000[0].1, t1000[1].0, t1000[1].1
        ),
    }
}

pub struct ScheduleRow {
    pub id: &'static str,
    pub level: u8,
    pub param: &'static str,
    pub value: String,
}

/// Full schedule as printable rows (33 ids x 5 levels = 165).
pub fn schedule_rows(variant: ScheduleVariant) -> Vec<ScheduleRow> {
    let mut rows = Vec::with_capacity(165);
    for &id in &ALL_IDS {
        for level in 1..=5u8 {
            let cfg = resolve(id, level, variant).expect("static schedule");
            rows.push(ScheduleRow {
                id: id.as_str(),
                level,
                param: param_name(id),
                value: param_value(&cfg.param),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn all_ids_resolve_at_all_levels() {
        for &id in &ALL_IDS {
            for level in 1..=5 {
                resolve(id, level, ScheduleVariant::Default).unwrap();
                resolve(id, level, ScheduleVariant::Appendix).unwrap();
            }
        }
        assert_eq!(schedule_rows(ScheduleVariant::Default).len(), 165);
        assert!(resolve(ObsAdd, 0, ScheduleVariant::Default).is_err());
        assert!(resolve(ObsAdd, 6, ScheduleVariant::Default).is_err());
        assert!(ViolationId::parse("obs_addx").is_err());
        for &id in &ALL_IDS {
            assert_eq!(ViolationId::parse(id.as_str()).unwrap(), id);
        }
    }

    #[test]
    fn schedule_values_match_published_rows() {
        let Param::Snr(v) = resolve(ObsAdd, 3, ScheduleVariant::Default).unwrap().param else {
            panic!()
        };
        assert_abs_diff_eq!(v, 0.575);
        let Param::NumChanges(n) = resolve(Stat, 4, ScheduleVariant::Default).unwrap().param
        else {
            panic!()
        };
        assert_eq!(n, 4);
        let Param::Distortion(d) = resolve(FaithLag, 5, ScheduleVariant::Default).unwrap().param
        else {
            panic!()
        };
        assert_eq!(d, 0.0);
        let Param::SeriesLength(t) = resolve(Length, 1, ScheduleVariant::Default).unwrap().param
        else {
            panic!()
        };
        assert_eq!(t, 76);
        let Param::BlendAlpha(a) = resolve(InnoCom, 5, ScheduleVariant::Default).unwrap().param
        else {
            panic!()
        };
        assert_eq!(a, 1.0);
        let Param::MissingRate(r) = resolve(Mnar, 5, ScheduleVariant::Default).unwrap().param
        else {
            panic!()
        };
        assert_eq!(r, 0.75);
    }

    #[test]
    fn appendix_variant_swaps_the_flagged_schedules() {
        let Param::Snr(v) = resolve(ObsMul, 1, ScheduleVariant::Appendix).unwrap().param else {
            panic!()
        };
        assert_eq!(v, 10.0);
        let Param::SplinePoints(n) = resolve(NlTrend, 1, ScheduleVariant::Appendix).unwrap().param
        else {
            panic!()
        };
        assert_eq!(n, 25);
        let Param::LinkProb(p) = resolve(ConfLag, 3, ScheduleVariant::Appendix).unwrap().param
        else {
            panic!()
        };
        assert_eq!(p, 0.5);
        // unflagged schedules fall through to the defaults
        let Param::CoefDelta(d) = resolve(Coef, 2, ScheduleVariant::Appendix).unwrap().param
        else {
            panic!()
        };
        assert_eq!(d, 0.33125);
    }

    #[test]
    fn monotone_schedules() {
        let snr: Vec<f64> = (1..=5)
            .map(|l| match resolve(ObsAdd, l, ScheduleVariant::Default).unwrap().param {
                Param::Snr(v) => v,
                _ => unreachable!(),
            })
            .collect();
        assert!(snr.windows(2).all(|w| w[1] < w[0]));
        let p: Vec<f64> = (1..=5)
            .map(|l| match resolve(ConfInst, l, ScheduleVariant::Default).unwrap().param {
                Param::LinkProb(v) => v,
                _ => unreachable!(),
            })
            .collect();
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        let d: Vec<f64> = (1..=5)
            .map(|l| match resolve(FaithInst, l, ScheduleVariant::Default).unwrap().param {
                Param::Distortion(v) => v,
                _ => unreachable!(),
            })
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        for id in [InnoMul, InnoAuto, InnoUni, InnoWeib, Scale, Mcar] {
            let a: Vec<f64> = (1..=5)
                .map(|l| match resolve(id, l, ScheduleVariant::Default).unwrap().param {
                    Param::BlendAlpha(v) | Param::MissingRate(v) => v,
                    _ => unreachable!(),
                })
                .collect();
            assert!(a.windows(2).all(|w| w[1] > w[0]), "{id:?}");
        }
    }

    #[test]
    fn regime_compatibility() {
        let grid = Regime::default_grid();
        assert_eq!(compatible_regimes(ObsAdd, &grid).len(), 16);
        assert_eq!(compatible_regimes(FaithInst, &grid).len(), 8);
        assert_eq!(compatible_regimes(ConfInst, &grid).len(), 8);
        assert!(compatible_regimes(FaithInst, &grid).iter().all(|r| r.p_inst > 0.0));
        let len_regimes = compatible_regimes(Length, &grid);
        assert_eq!(len_regimes.len(), 8);
        assert!(len_regimes.iter().all(|r| r.t == 0));
        assert_eq!(compatible_regimes(FaithZero, &grid).len(), 16);
    }

    #[test]
    fn compose_rules() {
        let v = ScheduleVariant::Default;
        let ok = compose(vec![
            resolve(ObsCom, 3, v).unwrap(),
            resolve(InnoCom, 3, v).unwrap(),
        ])
        .unwrap();
        // generation-time first
        assert_eq!(ok[0].id, InnoCom);
        assert_eq!(ok[1].id, ObsCom);
        assert!(compose(vec![
            resolve(ConfInst, 2, v).unwrap(),
            resolve(ConfLag, 2, v).unwrap(),
        ])
        .is_ok());
        let err = compose(vec![
            resolve(InnoUni, 1, v).unwrap(),
            resolve(InnoWeib, 1, v).unwrap(),
        ]);
        assert!(matches!(err, Err(Error::ConflictingViolations(_, _))));
    }

    #[test]
    fn change_point_tables() {
        assert_eq!(stat_change_points(1000, 3), vec![250, 500, 750]);
        assert_eq!(stat_change_points(250, 5), vec![41, 82, 122, 163, 205]);
        assert_eq!(stat_change_points(500, 4), vec![100, 200, 300, 400]);
        assert_eq!(coef_change_points(250), vec![50, 100, 150, 200]);
        assert_eq!(coef_change_points(1000), vec![200, 400, 600, 800]);
    }

    #[test]
    fn empty_interval_tables() {
        let cfg = resolve(Empty, 1, ScheduleVariant::Default).unwrap();
        assert_eq!(empty_intervals(&cfg.param, 250), vec![(40, 100), (150, 210)]);
        assert_eq!(empty_intervals(&cfg.param, 1000), vec![(160, 400), (600, 840)]);
        // other lengths scale the T=250 table proportionally
        assert_eq!(empty_intervals(&cfg.param, 500), vec![(80, 200), (300, 420)]);
        let lvl5 = resolve(Empty, 5, ScheduleVariant::Default).unwrap();
        assert_eq!(empty_intervals(&lvl5.param, 250), vec![(6, 122), (128, 244)]);
    }
}
