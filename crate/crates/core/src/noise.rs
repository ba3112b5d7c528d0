//! Noise kernels shared by the observational and innovation sides, SNR
//! rescaling, structured/non-Gaussian blending, unequal innovation
//! variances, and the exogenous high-frequency pool.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Weibull};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::numeric::highpass_filtfilt;

pub const AUTO_MIX: f64 = 0.5;
pub const TIME_GROWTH: f64 = 0.01;
pub const TIME_PERIOD: f64 = 730.0;
pub const SHOCK_VALUE: f64 = 5.0;
pub const SHOCK_PROB: f64 = 0.05;
pub const WEIBULL_SHAPE: f64 = 1.5;
pub const UNIFORM_HALF_WIDTH: f64 = 2.0;
pub const DEFAULT_CUTOFF: f64 = 0.1;

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Add,
    Mul,
    Time,
    Auto,
    Com,
    Shock,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgDist {
    Uniform,
    Weibull,
}

/// Innovation configuration of one SCM.
#[derive(Debug, Clone, PartialEq)]
pub enum InnovationSpec {
    Gaussian,
    /// alpha-blend of a structured kernel with fresh standard normal noise;
    /// alpha weights the violating component.
    Structured { kind: NoiseKind, alpha: f64 },
    NonGaussian { dist: NgDist, alpha: f64 },
    UnequalVar { sigma2: Vec<f64> },
}

/// High-passed exogenous sequences backing the `real` kernels and MAR masks.
#[derive(Debug, Clone)]
pub struct ExogenousPool {
    channels: Vec<Vec<f64>>,
}

impl ExogenousPool {
    /// Seeded random-walk stand-in, high-passed and standardized per channel.
    pub fn standin(seed: u64, n_channels: usize, len: usize, cutoff: f64) -> Self {
        let mut rng = crate::rng::stream(seed, &[b"exogenous-pool"]);
        let mut channels = Vec::with_capacity(n_channels);
        for _ in 0..n_channels {
            let mut walk = Vec::with_capacity(len);
            let mut acc = 0.0;
            for _ in 0..len {
                acc += normal(&mut rng);
                walk.push(acc);
            }
            let filtered = highpass_filtfilt(&walk, cutoff).expect("stand-in length is fixed");
            channels.push(standardize(filtered));
        }
        Self { channels }
    }

    /// CSV of real-valued columns, header optional; each column is
    /// high-passed and standardized on ingestion.
    pub fn from_csv(path: &std::path::Path, cutoff: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
            match parsed {
                Ok(vals) => rows.push(vals),
                Err(_) if idx == 0 => continue, // header
                Err(_) => {
                    return Err(Error::Format {
                        path: path.display().to_string(),
                        reason: format!("unparsable row {}", idx + 1),
                    })
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: "no data rows".into(),
            });
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: "ragged rows".into(),
            });
        }
        let mut channels = Vec::with_capacity(width);
        for c in 0..width {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            channels.push(standardize(highpass_filtfilt(&col, cutoff)?));
        }
        Ok(Self { channels })
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// One contiguous slice of length `t`, channel and offset drawn from `rng`.
    pub fn draw_slice<R: Rng>(&self, t: usize, rng: &mut R) -> Result<Vec<f64>> {
        let have = self.len();
        if t > have {
            return Err(Error::PoolExhausted { need: t, have });
        }
        let channel = rng.gen_range(0..self.channels.len());
        let offset = rng.gen_range(0..=have - t);
        Ok(self.channels[channel][offset..offset + t].to_vec())
    }

    /// d x t matrix of pool values (independent slices per row).
    pub fn draw_matrix<R: Rng>(&self, d: usize, t: usize, rng: &mut R) -> Result<Array2<f64>> {
        let mut out = Array2::<f64>::zeros((d, t));
        for i in 0..d {
            let slice = self.draw_slice(t, rng)?;
            for (tt, v) in slice.into_iter().enumerate() {
                out[(i, tt)] = v;
            }
        }
        Ok(out)
    }
}

fn standardize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 0.0 {
        for x in &mut v {
            *x = (*x - mean) / sd;
        }
    }
    v
}

/// Stateful noise source; one instance per sample, never shared.
#[derive(Debug, Clone)]
pub struct NoiseKernel {
    pub kind: NoiseKind,
    d: usize,
    prev: Vec<f64>,
    slices: Vec<Vec<f64>>,
}

impl NoiseKernel {
    pub fn new<R: Rng>(
        kind: NoiseKind,
        d: usize,
        t_max: usize,
        pool: Option<&ExogenousPool>,
        rng: &mut R,
    ) -> Result<Self> {
        let slices = if kind == NoiseKind::Real {
            let pool = pool.ok_or_else(|| {
                Error::InvalidArgument("real noise kernel needs an exogenous pool".into())
            })?;
            (0..d).map(|_| pool.draw_slice(t_max, rng)).collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Self { kind, d, prev: vec![0.0; d], slices })
    }

    /// One draw per variable at step `t`; `signal` feeds the multiplicative kind.
    pub fn kernel_step<R: Rng>(&mut self, t: usize, signal: &[f64], rng: &mut R) -> Vec<f64> {
        let d = self.d;
        match self.kind {
            NoiseKind::Add => (0..d).map(|_| normal(rng)).collect(),
            NoiseKind::Mul => (0..d).map(|i| signal[i] * normal(rng)).collect(),
            NoiseKind::Time => {
                let envelope = (1.0 + TIME_GROWTH * t as f64)
                    * (2.0 * std::f64::consts::PI * t as f64 / TIME_PERIOD).sin();
                (0..d).map(|_| normal(rng) * envelope).collect()
            }
            NoiseKind::Auto => {
                let out: Vec<f64> = (0..d)
                    .map(|i| AUTO_MIX * self.prev[i] + (1.0 - AUTO_MIX) * normal(rng))
                    .collect();
                self.prev.copy_from_slice(&out);
                out
            }
            NoiseKind::Com => {
                let shared = normal(rng);
                vec![shared; d]
            }
            NoiseKind::Shock => (0..d)
                .map(|_| if rng.gen::<f64>() < SHOCK_PROB { SHOCK_VALUE } else { 0.0 })
                .collect(),
            NoiseKind::Real => (0..d).map(|i| self.slices[i][t]).collect(),
        }
    }
}

/// Builds the full observational noise matrix for a finished series.
pub fn build_noise_matrix<R: Rng>(
    kernel: &mut NoiseKernel,
    x: &Array2<f64>,
    rng: &mut R,
) -> Array2<f64> {
    let (d, t_len) = x.dim();
    let mut out = Array2::<f64>::zeros((d, t_len));
    let mut signal = vec![0.0; d];
    for t in 0..t_len {
        for i in 0..d {
            signal[i] = x[(i, t)];
        }
        let step = kernel.kernel_step(t, &signal, rng);
        for i in 0..d {
            out[(i, t)] = step[i];
        }
    }
    out
}

/// Rescales base noise so that mean signal power over mean noise power
/// equals `snr` exactly.
pub fn scale_to_snr(x: &Array2<f64>, zeta: &Array2<f64>, snr: f64) -> Result<Array2<f64>> {
    if snr <= 0.0 {
        return Err(Error::InvalidArgument(format!("snr must be positive, got {snr}")));
    }
    if x.dim() != zeta.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", x.dim(), zeta.dim())));
    }
    let n = (x.len()) as f64;
    let p_x = x.iter().map(|v| v * v).sum::<f64>() / n;
    let p_z = zeta.iter().map(|v| v * v).sum::<f64>() / n;
    if p_x <= 0.0 {
        return Err(Error::ZeroPower("signal"));
    }
    if p_z <= 0.0 {
        return Err(Error::ZeroPower("noise"));
    }
    let alpha = ((p_x / snr) / p_z).sqrt();
    Ok(zeta * alpha)
}

/// alpha * zeta + (1 - alpha) * eta with fresh standard normal eta;
/// alpha weights the violating component.
pub fn blend_structured<R: Rng>(zeta: &Array2<f64>, alpha: f64, rng: &mut R) -> Array2<f64> {
    assert!((0.0..=1.0).contains(&alpha), "alpha out of range: {alpha}");
    zeta.map(|&z| alpha * z + (1.0 - alpha) * normal(rng))
}

/// Unit-variance mixture of a centered non-Gaussian draw and a standard
/// normal. The level parameter `alpha` weights the non-Gaussian part.
#[derive(Debug, Clone)]
pub struct NgBlend {
    dist: NgDist,
    w: f64,
    mean: f64,
    denom: f64,
}

impl NgBlend {
    pub fn new(dist: NgDist, alpha: f64) -> Self {
        assert!((0.0..=1.0).contains(&alpha), "alpha out of range: {alpha}");
        let w = 1.0 - alpha;
        let (mean, var) = match dist {
            NgDist::Uniform => (0.0, UNIFORM_HALF_WIDTH * UNIFORM_HALF_WIDTH / 3.0),
            NgDist::Weibull => {
                let m = gamma(1.0 + 1.0 / WEIBULL_SHAPE);
                let m2 = gamma(1.0 + 2.0 / WEIBULL_SHAPE);
                (m, m2 - m * m)
            }
        };
        let denom = (var * (1.0 - 2.0 * w) + w * w * (var + 1.0)).sqrt();
        Self { dist, w, mean, denom }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let omega = match self.dist {
            NgDist::Uniform => rng.gen_range(-UNIFORM_HALF_WIDTH..UNIFORM_HALF_WIDTH),
            NgDist::Weibull => {
                Weibull::new(1.0, WEIBULL_SHAPE).expect("fixed parameters").sample(rng)
            }
        };
        let psi = normal(rng);
        ((1.0 - self.w) * (omega - self.mean) + self.w * psi) / self.denom
    }
}

pub fn blend_non_gaussian<R: Rng>(
    dist: NgDist,
    alpha: f64,
    shape: (usize, usize),
    rng: &mut R,
) -> Array2<f64> {
    let blend = NgBlend::new(dist, alpha);
    Array2::from_shape_fn(shape, |_| blend.draw(rng))
}

/// Per-variable innovation variances drawn from the union of two intervals.
pub fn sample_unequal_variances<R: Rng>(
    lo: (f64, f64),
    hi: (f64, f64),
    d: usize,
    rng: &mut R,
) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let (a, b) = if rng.gen_range(0..2u8) == 0 { lo } else { hi };
            if a == b {
                a
            } else {
                rng.gen_range(a..b)
            }
        })
        .collect()
}

/// Zero-phase high-pass extraction of the fast component of a series.
pub fn highpass_extract(series: &[f64], cutoff: f64) -> Result<Vec<f64>> {
    highpass_filtfilt(series, cutoff)
}
