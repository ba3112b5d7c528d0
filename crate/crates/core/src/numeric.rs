//! Shared numeric kernels: composite Simpson quadrature, not-a-knot cubic
//! splines, and a zero-phase second-order Butterworth high-pass.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Composite Simpson rule on `nodes` equally spaced points (odd, >= 3).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: usize) -> f64 {
    assert!(nodes >= 3 && nodes % 2 == 1, "simpson needs an odd node count >= 3");
    let h = (b - a) / (nodes - 1) as f64;
    let mut acc = f(a) + f(b);
    for k in 1..nodes - 1 {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * k as f64);
    }
    acc * h / 3.0
}

/// Cubic interpolating spline with not-a-knot end conditions.
///
/// Outside the knot range the boundary cubic is extended; callers that need
/// different tail behavior handle it themselves.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn not_a_knot(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::ShapeMismatch(format!(
                "spline knots {} vs values {}",
                n,
                ys.len()
            )));
        }
        if n < 4 {
            return Err(Error::InvalidArgument(format!(
                "cubic spline needs at least 4 points, got {n}"
            )));
        }
        for w in xs.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidArgument("spline abscissae must be strictly increasing".into()));
            }
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sys = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        // third-derivative continuity at x_1 and x_{n-2}
        sys[(0, 0)] = h[1];
        sys[(0, 1)] = -(h[0] + h[1]);
        sys[(0, 2)] = h[0];
        sys[(n - 1, n - 3)] = h[n - 2];
        sys[(n - 1, n - 2)] = -(h[n - 3] + h[n - 2]);
        sys[(n - 1, n - 1)] = h[n - 3];
        for i in 1..n - 1 {
            sys[(i, i - 1)] = h[i - 1] / 6.0;
            sys[(i, i)] = (h[i - 1] + h[i]) / 3.0;
            sys[(i, i + 1)] = h[i] / 6.0;
            rhs[i] = (ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1];
        }
        let m = sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidArgument("degenerate spline system".into()))?;
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m: m.iter().copied().collect(),
        })
    }

    /// Equidistant abscissae on [-1, 1].
    pub fn on_unit_grid(ys: &[f64]) -> Result<Self> {
        let n = ys.len();
        if n < 4 {
            return Err(Error::InvalidArgument(format!(
                "cubic spline needs at least 4 points, got {n}"
            )));
        }
        let xs: Vec<f64> = (0..n)
            .map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64)
            .collect();
        Self::not_a_knot(&xs, ys)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        // boundary cubics extend beyond the knot range
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = self.xs[i + 1] - x;
        let b = x - self.xs[i];
        self.m[i] * a * a * a / (6.0 * h)
            + self.m[i + 1] * b * b * b / (6.0 * h)
            + (self.ys[i] / h - self.m[i] * h / 6.0) * a
            + (self.ys[i + 1] / h - self.m[i + 1] * h / 6.0) * b
    }
}

// Direct form II transposed biquad coefficients for a second-order
// Butterworth high-pass; cutoff is a fraction of the sampling rate.
fn butter2_highpass(cutoff: f64) -> ([f64; 3], [f64; 3]) {
    let k = (std::f64::consts::PI * cutoff).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
    let b = [norm, -2.0 * norm, norm];
    let a = [1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - sqrt2 * k + k * k) * norm];
    (b, a)
}

// Steady-state delay states for a unit-step input (matches the usual
// filter-initialization trick that suppresses startup transients).
fn biquad_zi(b: &[f64; 3], a: &[f64; 3]) -> [f64; 2] {
    let a11 = 1.0 + a[1];
    let a12 = -1.0;
    let a21 = a[2];
    let a22 = 1.0;
    let r1 = b[1] - a[1] * b[0];
    let r2 = b[2] - a[2] * b[0];
    let det = a11 * a22 - a12 * a21;
    [(r1 * a22 - r2 * a12) / det, (a11 * r2 - a21 * r1) / det]
}

fn biquad_filter(b: &[f64; 3], a: &[f64; 3], x: &[f64], zi: [f64; 2]) -> Vec<f64> {
    let mut z1 = zi[0];
    let mut z2 = zi[1];
    let mut y = Vec::with_capacity(x.len());
    for &v in x {
        let out = b[0] * v + z1;
        z1 = b[1] * v - a[1] * out + z2;
        z2 = b[2] * v - a[2] * out;
        y.push(out);
    }
    y
}

const FILTFILT_PAD: usize = 9;

/// Zero-phase second-order Butterworth high-pass (forward-backward pass with
/// odd-reflection padding). `cutoff` is normalized to the sampling rate,
/// 0 < cutoff < 0.5.
pub fn highpass_filtfilt(x: &[f64], cutoff: f64) -> Result<Vec<f64>> {
    if !(cutoff > 0.0 && cutoff < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "cutoff must lie in (0, 0.5), got {cutoff}"
        )));
    }
    if x.len() < 12 {
        return Err(Error::InvalidArgument(format!(
            "series too short for zero-phase filtering: {} < 12",
            x.len()
        )));
    }
    let (b, a) = butter2_highpass(cutoff);
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * FILTFILT_PAD);
    for j in (1..=FILTFILT_PAD).rev() {
        ext.push(2.0 * x[0] - x[j]);
    }
    ext.extend_from_slice(x);
    for j in 1..=FILTFILT_PAD {
        ext.push(2.0 * x[n - 1] - x[n - 1 - j]);
    }
    let zi = biquad_zi(&b, &a);
    let mut y = biquad_filter(&b, &a, &ext, [zi[0] * ext[0], zi[1] * ext[0]]);
    y.reverse();
    let mut y = biquad_filter(&b, &a, &y, [zi[0] * y[0], zi[1] * y[0]]);
    y.reverse();
    Ok(y[FILTFILT_PAD..FILTFILT_PAD + n].to_vec())
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        None
    } else {
        Some(sab / (saa * sbb).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn simpson_integrates_polynomials_exactly() {
        // exact through cubics
        assert_abs_diff_eq!(simpson(|x| x * x * x + x, -1.0, 1.0, 3), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(simpson(|x| x * x, -1.0, 1.0, 2001), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(simpson(|_x| 1.0, -3.0, 5.0, 11), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn spline_interpolates_and_reproduces_cubics() {
        let xs: Vec<f64> = (0..7).map(|k| -1.0 + k as f64 / 3.0).collect();
        let f = |x: f64| 2.0 * x * x * x - x * x + 0.5 * x - 3.0;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let sp = CubicSpline::not_a_knot(&xs, &ys).unwrap();
        for (&x, &y) in xs.iter().zip(&ys) {
            assert_abs_diff_eq!(sp.eval(x), y, epsilon = 1e-10);
        }
        // not-a-knot reproduces a global cubic everywhere, including the tails
        for k in 0..100 {
            let x = -1.4 + 3.0 * k as f64 / 99.0;
            assert_abs_diff_eq!(sp.eval(x), f(x), epsilon = 1e-9);
        }
    }

    #[test]
    fn spline_rejects_small_and_unsorted_input() {
        assert!(CubicSpline::not_a_knot(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(CubicSpline::not_a_knot(&[0.0, 1.0, 1.0, 2.0], &[0.0; 4]).is_err());
        assert!(CubicSpline::on_unit_grid(&[0.0; 3]).is_err());
    }

    #[test]
    fn highpass_removes_dc() {
        let x = vec![3.7; 400];
        let y = highpass_filtfilt(&x, 0.1).unwrap();
        for v in y {
            assert!(v.abs() < 1e-9, "dc leak: {v}");
        }
    }

    #[test]
    fn highpass_preserves_fast_sinusoid() {
        // frequency 0.3 of fs, cutoff 0.05: well inside the passband
        let n = 2000;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 0.3 * t as f64).sin())
            .collect();
        let y = highpass_filtfilt(&x, 0.05).unwrap();
        let amp = y[200..n - 200].iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!((amp - 1.0).abs() < 0.05, "amplitude {amp}");
    }

    #[test]
    fn highpass_makes_random_walk_stationary() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut walk = vec![0.0f64];
        for _ in 1..20_000 {
            let step: f64 = rng.gen::<f64>() - 0.5;
            walk.push(walk.last().unwrap() + step);
        }
        let y = highpass_filtfilt(&walk, 0.1).unwrap();
        let var = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / s.len() as f64
        };
        let v1 = var(&y[..10_000]);
        let v2 = var(&y[10_000..]);
        assert!(v1 / v2 < 2.0 && v2 / v1 < 2.0, "v1={v1} v2={v2}");
    }

    #[test]
    fn highpass_rejects_short_series() {
        assert!(highpass_filtfilt(&[0.0; 11], 0.1).is_err());
        assert!(highpass_filtfilt(&[0.0; 50], 0.5).is_err());
    }

    #[test]
    fn pearson_basics() {
        let a: Vec<f64> = (0..50).map(|v| v as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_abs_diff_eq!(pearson(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
        let c: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&a, &c).unwrap(), -1.0, epsilon = 1e-12);
        assert!(pearson(&a, &vec![1.0; 50]).is_none());
    }

    #[test]
    fn spline_matches_line_through_collinear_points() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a: f64 = rng.gen::<f64>() * 2.0 - 1.0;
            let b: f64 = rng.gen::<f64>() * 2.0 - 1.0;
            let ys: Vec<f64> = (0..6)
                .map(|k| a * (-1.0 + 2.0 * k as f64 / 5.0) + b)
                .collect();
            let sp = CubicSpline::on_unit_grid(&ys).unwrap();
            for k in 0..101 {
                let x = -1.0 + 2.0 * k as f64 / 100.0;
                assert_abs_diff_eq!(sp.eval(x), a * x + b, epsilon = 1e-10);
            }
        }
    }
}
