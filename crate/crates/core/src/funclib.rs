//! Nonlinear function families used on causal links: a monotonic power
//! family, spline trends, GP draws under an RBF kernel, compositions of
//! elementary functions, saturation wrappers, and the D_MSE nonlinearity
//! measure (minimum mean squared deviation from any line on [-1, 1]).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::CubicSpline;

/// Lower/upper beta intervals per level; a draw picks one of the two sides
/// uniformly. Level 1 is nearly linear, level 5 strongly curved.
pub const BETA_INTERVALS: [((f64, f64), (f64, f64)); 5] = [
    ((0.5, 1.0), (1.0, 2.0)),
    ((0.25, 0.5), (2.0, 4.0)),
    ((0.125, 0.25), (4.0, 8.0)),
    ((1.0 / 12.0, 0.125), (8.0, 12.0)),
    ((0.05, 1.0 / 12.0), (12.0, 20.0)),
];

const POWER_C: f64 = 2.0;
pub const GP_ANCHORS: usize = 50;
const INTEGRATION_NODES: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonoVariant {
    F1,
    F2,
    F3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseFn {
    Cbrt,
    Tanh,
    Asinh,
    Relu,
    Id,
    Square,
    Abs,
    Cosh,
    Sin,
    Cos,
}

impl BaseFn {
    pub const ALL: [BaseFn; 10] = [
        BaseFn::Cbrt,
        BaseFn::Tanh,
        BaseFn::Asinh,
        BaseFn::Relu,
        BaseFn::Id,
        BaseFn::Square,
        BaseFn::Abs,
        BaseFn::Cosh,
        BaseFn::Sin,
        BaseFn::Cos,
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            BaseFn::Cbrt => x.cbrt(),
            BaseFn::Tanh => x.tanh(),
            BaseFn::Asinh => x.asinh(),
            BaseFn::Relu => x.max(0.0),
            BaseFn::Id => x,
            BaseFn::Square => x * x,
            BaseFn::Abs => x.abs(),
            BaseFn::Cosh => x.cosh(),
            BaseFn::Sin => x.sin(),
            BaseFn::Cos => x.cos(),
        }
    }
}

/// One composition chain: sign * outer(inner(x)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeChain {
    pub inner: BaseFn,
    pub outer: BaseFn,
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Identity,
    Monotonic { variant: MonoVariant, beta: f64 },
    /// Sorted knot values placed at equidistant abscissae on [-1, 1].
    Spline { knot_values: Vec<f64> },
    /// One GP draw under the RBF kernel, stored as ridge weights w so that
    /// f(x) = sum_j w_j k(x, x_j) over equidistant anchors on [-1, 1]; one
    /// formula everywhere keeps f smooth and decaying outside the range.
    GpRbf { weights: Vec<f64> },
    Composite { chains: [CompositeChain; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrapper {
    None,
    /// f(x) inside [-1, 1], tanh(x) outside.
    SaturateInput,
    /// f(x) while |f(x)| <= 1, tanh(f(x)) otherwise.
    SaturateOutput,
}

/// Functions are stored as data, never closures, so SCMs replay bit-identically.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDescriptor {
    pub family: Family,
    pub wrapper: Wrapper,
}

impl FunctionDescriptor {
    pub fn identity() -> Self {
        Self { family: Family::Identity, wrapper: Wrapper::None }
    }

    pub fn compile(&self) -> Result<Compiled> {
        let kernel = match &self.family {
            Family::Identity => CompiledKernel::Identity,
            Family::Monotonic { variant, beta } => {
                CompiledKernel::Monotonic { variant: *variant, beta: *beta }
            }
            Family::Spline { knot_values } => {
                CompiledKernel::Spline(CubicSpline::on_unit_grid(knot_values)?)
            }
            Family::GpRbf { weights } => CompiledKernel::GpRbf { weights: weights.clone() },
            Family::Composite { chains } => CompiledKernel::Composite { chains: *chains },
        };
        Ok(Compiled { kernel, wrapper: self.wrapper })
    }
}

#[derive(Debug, Clone)]
enum CompiledKernel {
    Identity,
    Monotonic { variant: MonoVariant, beta: f64 },
    Spline(CubicSpline),
    GpRbf { weights: Vec<f64> },
    Composite { chains: [CompositeChain; 2] },
}

/// Evaluable form of a descriptor; construction is deterministic.
#[derive(Debug, Clone)]
pub struct Compiled {
    kernel: CompiledKernel,
    wrapper: Wrapper,
}

impl Compiled {
    fn raw(&self, x: f64) -> f64 {
        match &self.kernel {
            CompiledKernel::Identity => x,
            CompiledKernel::Monotonic { variant, beta } => eval_monotonic(*variant, *beta, x),
            CompiledKernel::Spline(sp) => sp.eval(x),
            CompiledKernel::GpRbf { weights } => {
                let mut acc = 0.0;
                for (j, w) in weights.iter().enumerate() {
                    let xj = anchor_x(j, weights.len());
                    acc += w * rbf_kernel(x, xj);
                }
                acc
            }
            CompiledKernel::Composite { chains } => chains
                .iter()
                .map(|c| c.sign * c.outer.eval(c.inner.eval(x)))
                .sum(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.wrapper {
            Wrapper::None => self.raw(x),
            Wrapper::SaturateInput => {
                if x.abs() <= 1.0 {
                    self.raw(x)
                } else {
                    x.tanh()
                }
            }
            Wrapper::SaturateOutput => {
                let y = self.raw(x);
                if y.abs() <= 1.0 {
                    y
                } else {
                    y.tanh()
                }
            }
        }
    }
}

fn eval_monotonic(variant: MonoVariant, beta: f64, x: f64) -> f64 {
    match variant {
        MonoVariant::F1 => x.signum() * x.abs().powf(beta),
        MonoVariant::F2 => POWER_C * ((x + 1.0) / POWER_C).abs().powf(beta) - 1.0,
        MonoVariant::F3 => -POWER_C * ((x - 1.0) / POWER_C).abs().powf(beta) + 1.0,
    }
}

fn anchor_x(j: usize, n: usize) -> f64 {
    -1.0 + 2.0 * j as f64 / (n - 1) as f64
}

pub fn rbf_kernel(x: f64, y: f64) -> f64 {
    (-(x - y) * (x - y) / 2.0).exp()
}

/// Monotonic power-family draw: variant uniform over {f1, f2, f3}, beta
/// uniform from the lower or upper interval of the level (coin flip).
pub fn sample_monotonic<R: Rng>(level: u8, rng: &mut R) -> FunctionDescriptor {
    assert!((1..=5).contains(&level), "level out of range: {level}");
    let variant = match rng.gen_range(0..3u8) {
        0 => MonoVariant::F1,
        1 => MonoVariant::F2,
        _ => MonoVariant::F3,
    };
    let (lo, hi) = BETA_INTERVALS[(level - 1) as usize];
    let side = if rng.gen_range(0..2u8) == 0 { lo } else { hi };
    let beta = rng.gen_range(side.0..side.1);
    FunctionDescriptor {
        family: Family::Monotonic { variant, beta },
        wrapper: Wrapper::SaturateInput,
    }
}

/// Spline trend: `n_points` values drawn Uniform(-1, 1), sorted ascending,
/// interpolated at equidistant abscissae. Cubic interpolation needs >= 4.
pub fn sample_spline_trend<R: Rng>(n_points: usize, rng: &mut R) -> Result<FunctionDescriptor> {
    if n_points < 4 {
        return Err(Error::InvalidArgument(format!(
            "spline trend needs at least 4 points, got {n_points}"
        )));
    }
    let mut values: Vec<f64> = (0..n_points).map(|_| rng.gen_range(-1.0..1.0)).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(FunctionDescriptor {
        family: Family::Spline { knot_values: values },
        wrapper: Wrapper::SaturateInput,
    })
}

/// One zero-mean GP draw under the RBF kernel (length scale 1), realized at
/// 50 equidistant anchors via Cholesky with escalating jitter and stored as
/// the ridge weights of its conditional mean.
pub fn sample_gp_rbf<R: Rng>(rng: &mut R) -> Result<FunctionDescriptor> {
    let n = GP_ANCHORS;
    let base = DMatrix::from_fn(n, n, |i, j| rbf_kernel(anchor_x(i, n), anchor_x(j, n)));
    let z = DVector::from_fn(n, |_, _| standard_normal(rng));
    let mut jitter = 1e-9;
    loop {
        let mut k = base.clone();
        for i in 0..n {
            k[(i, i)] += jitter;
        }
        if let Some(chol) = nalgebra::linalg::Cholesky::new(k) {
            let values = chol.l() * &z;
            let weights = chol.solve(&values);
            return Ok(FunctionDescriptor {
                family: Family::GpRbf { weights: weights.iter().copied().collect() },
                wrapper: Wrapper::None,
            });
        }
        jitter *= 10.0;
        if jitter > 1e-6 {
            return Err(Error::CholeskyFailed);
        }
    }
}

/// Composition of two chains of two elementary functions each, with
/// uniform sign flips, output-saturated.
pub fn sample_composite<R: Rng>(rng: &mut R) -> FunctionDescriptor {
    let chain = |rng: &mut R| CompositeChain {
        inner: BaseFn::ALL[rng.gen_range(0..BaseFn::ALL.len())],
        outer: BaseFn::ALL[rng.gen_range(0..BaseFn::ALL.len())],
        sign: if rng.gen_range(0..2u8) == 0 { 1.0 } else { -1.0 },
    };
    let chains = [chain(rng), chain(rng)];
    FunctionDescriptor {
        family: Family::Composite { chains },
        wrapper: Wrapper::SaturateOutput,
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Saturation wrapper as a standalone combinator.
pub fn wrap_saturate<F: Fn(f64) -> f64>(f: F, output_mode: bool, alpha: f64) -> impl Fn(f64) -> f64 {
    assert!(alpha > 0.0);
    move |x: f64| {
        if output_mode {
            let y = f(x);
            if y.abs() <= alpha {
                y
            } else {
                y.tanh()
            }
        } else if x.abs() <= alpha {
            f(x)
        } else {
            x.tanh()
        }
    }
}

fn grid_values<F: Fn(f64) -> f64>(f: &F) -> Result<Vec<f64>> {
    let n = INTEGRATION_NODES;
    let mut vals = Vec::with_capacity(n);
    for k in 0..n {
        let x = -1.0 + 2.0 * k as f64 / (n - 1) as f64;
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("f({x}) = {v}")));
        }
        vals.push(v);
    }
    Ok(vals)
}

fn simpson_grid(vals: impl Fn(usize, f64) -> f64) -> f64 {
    let n = INTEGRATION_NODES;
    let h = 2.0 / (n - 1) as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let x = -1.0 + h * k as f64;
        let w = if k == 0 || k == n - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * vals(k, x);
    }
    acc * h / 3.0
}

/// Best linear fit on [-1, 1]: a* = (3/2) int x f dx, b* = (1/2) int f dx.
pub fn optimal_line<F: Fn(f64) -> f64>(f: F) -> Result<(f64, f64)> {
    let vals = grid_values(&f)?;
    let a = 1.5 * simpson_grid(|k, x| x * vals[k]);
    let b = 0.5 * simpson_grid(|k, _| vals[k]);
    Ok((a, b))
}

/// D_MSE nonlinearity: (1/2) int (f - a*x - b*)^2 dx on [-1, 1].
pub fn nonlinearity_mse<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    let vals = grid_values(&f)?;
    let a = 1.5 * simpson_grid(|k, x| x * vals[k]);
    let b = 0.5 * simpson_grid(|k, _| vals[k]);
    let mse = 0.5
        * simpson_grid(|k, x| {
            let r = vals[k] - a * x - b;
            r * r
        });
    Ok(mse.max(0.0))
}

pub fn nonlinearity_mse_of(desc: &FunctionDescriptor) -> Result<f64> {
    let c = desc.compile()?;
    nonlinearity_mse(|x| c.eval(x))
}
