//! Small numerical building blocks shared by the engines: uniform grids,
//! deterministic summation, Gauss-Legendre panels, windows, interpolation,
//! the Dawson integral and a log-parabola peak fit.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Relative tolerance used when checking that sampled abscissae are uniform.
pub const UNIFORM_REL_TOL: f64 = 1e-12;

/// A uniformly spaced, strictly increasing grid `start + k * step`, `k < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    /// `points` samples spanning `[min, max]` inclusive. Returns `None` unless
    /// `points >= 2`, `min < max` and both ends are finite.
    pub fn linspace(min: f64, max: f64, points: usize) -> Option<Self> {
        if points < 2 || !(min < max) || !min.is_finite() || !max.is_finite() {
            return None;
        }
        Some(Self {
            start: min,
            step: (max - min) / (points - 1) as f64,
            len: points,
        })
    }

    /// Grid symmetric about zero covering `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, points: usize) -> Option<Self> {
        Self::linspace(-half_width, half_width, points)
    }

    /// Recovers the grid from sampled abscissae, requiring uniform spacing
    /// within [`UNIFORM_REL_TOL`] relative to the step.
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        if xs.len() < 2 {
            return None;
        }
        let n = xs.len();
        let step = (xs[n - 1] - xs[0]) / (n - 1) as f64;
        if !(step > 0.0) || !step.is_finite() {
            return None;
        }
        let scale = step.abs().max(xs[0].abs().max(xs[n - 1].abs()) * f64::EPSILON);
        for (k, &x) in xs.iter().enumerate() {
            let expected = xs[0] + k as f64 * step;
            if (x - expected).abs() > UNIFORM_REL_TOL.max(4.0 * f64::EPSILON) * scale * (n as f64).max(1.0) {
                return None;
            }
        }
        Some(Self {
            start: xs[0],
            step,
            len: n,
        })
    }

    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.at(self.len - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.at(k)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        let lo = self.start.min(self.end());
        let hi = self.start.max(self.end());
        let slack = self.step.abs() * 1e-9;
        x >= lo - slack && x <= hi + slack
    }

    /// Returns a copy with abscissae multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            start: self.start * factor,
            step: self.step * factor,
            len: self.len,
        }
    }

    /// Fractional index of `x`; `x = at(k)` maps to `k`.
    #[inline]
    pub fn position(&self, x: f64) -> f64 {
        (x - self.start) / self.step
    }
}

/// Pairwise (cascade) summation with a fixed split pattern. The result depends
/// only on the order of the input slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        let mut s = Complex64::new(0.0, 0.0);
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
}

/// Composite Gauss-Legendre rule on `[a, b]` split into `panels` equal panels
/// with `nodes` points each. Returns (abscissae, weights) in increasing order.
pub fn gauss_legendre_panels(a: f64, b: f64, panels: usize, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(nodes.max(1)).expect("nonzero"));
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    let mut xs = Vec::with_capacity(panels * pairs.len());
    let mut ws = Vec::with_capacity(panels * pairs.len());
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for &(x, w) in &pairs {
            xs.push(mid + half * x);
            ws.push(half * w);
        }
    }
    (xs, ws)
}

/// Tukey (tapered cosine) window of length `n`; `alpha = 0` is rectangular,
/// `alpha = 1` is Hann.
pub fn tukey(n: usize, alpha: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 || alpha <= 0.0 {
        return vec![1.0; n];
    }
    let alpha = alpha.min(1.0);
    let m = (n - 1) as f64;
    let edge = alpha * m / 2.0;
    (0..n)
        .map(|k| {
            let x = k as f64;
            if x < edge {
                0.5 * (1.0 + (PI * (x / edge - 1.0)).cos())
            } else if x > m - edge {
                0.5 * (1.0 + (PI * ((m - x) / edge - 1.0)).cos())
            } else {
                1.0
            }
        })
        .collect()
}

/// Four-point Lagrange interpolation of uniformly sampled complex data.
/// Falls back to linear interpolation on the two outermost intervals.
/// Returns `None` outside the sampled range.
pub fn interp_cubic(grid: &UniformGrid, ys: &[Complex64], x: f64) -> Option<Complex64> {
    debug_assert_eq!(grid.len, ys.len());
    let n = grid.len;
    if n < 2 || !grid.contains(x) {
        return None;
    }
    let pos = grid.position(x).clamp(0.0, (n - 1) as f64);
    let i = (pos.floor() as usize).min(n - 2);
    let t = pos - i as f64;
    if t == 0.0 {
        return Some(ys[i]);
    }
    if i == 0 || i + 2 >= n {
        return Some(ys[i] * (1.0 - t) + ys[i + 1] * t);
    }
    // nodes at -1, 0, 1, 2 relative to i
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    Some(ys[i - 1] * w0 + ys[i] * w1 + ys[i + 1] * w2 + ys[i + 2] * w3)
}

/// Start index and four Lagrange weights for `x` on `grid`. Next to the ends
/// the weights degrade to linear interpolation.
pub fn lagrange_stencil(grid: &UniformGrid, x: f64) -> (usize, [f64; 4]) {
    let n = grid.len;
    let pos = grid.position(x).clamp(0.0, (n - 1) as f64);
    let i = (pos.floor() as usize).min(n.saturating_sub(2));
    let t = pos - i as f64;
    if i == 0 || i + 2 >= n || n < 4 {
        return (i, [1.0 - t, t, 0.0, 0.0]);
    }
    let w = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    (i - 1, w)
}

/// Tensor-product four-point interpolation of a row-major table
/// (`gx` slow, `gy` fast). `None` outside the table.
pub fn interp_bicubic(gx: &UniformGrid, gy: &UniformGrid, values: &[Complex64], x: f64, y: f64) -> Option<Complex64> {
    if !gx.contains(x) || !gy.contains(y) {
        return None;
    }
    let (x0, wx) = lagrange_stencil(gx, x);
    let (y0, wy) = lagrange_stencil(gy, y);
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, wa) in wx.iter().enumerate() {
        if *wa == 0.0 {
            continue;
        }
        let base = (x0 + a) * gy.len + y0;
        let mut row = Complex64::new(0.0, 0.0);
        for (b, wb) in wy.iter().enumerate() {
            if *wb != 0.0 {
                row += values[base + b] * *wb;
            }
        }
        acc += row * *wa;
    }
    Some(acc)
}

/// Linear interpolation of uniformly sampled real data; `None` outside.
pub fn interp_linear(grid: &UniformGrid, ys: &[f64], x: f64) -> Option<f64> {
    let n = grid.len;
    if n < 2 || !grid.contains(x) {
        return None;
    }
    let pos = grid.position(x).clamp(0.0, (n - 1) as f64);
    let i = (pos.floor() as usize).min(n - 2);
    let t = pos - i as f64;
    Some(ys[i] * (1.0 - t) + ys[i + 1] * t)
}

/// Dawson's integral `F(x) = exp(-x^2) * int_0^x exp(t^2) dt`.
///
/// Taylor series for |x| < 1, Rybicki's exponentially convergent sampling
/// formula elsewhere (step 0.2, relative error near machine precision).
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1.0 {
        // F(x) = sum_n (-1)^n 2^n x^(2n+1) / (2n+1)!!
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0usize;
        while term.abs() > 1e-18 * sum.abs() && n < 60 {
            n += 1;
            term *= -2.0 * x2 / (2 * n + 1) as f64;
            sum += term;
        }
        return sum;
    }
    const H: f64 = 0.2;
    const NMAX: usize = 24;
    let n0 = 2.0 * (0.5 * ax / H).round();
    let xp = ax - n0 * H;
    let mut e1 = (2.0 * xp * H).exp();
    let e2 = e1 * e1;
    let mut d1 = n0 + 1.0;
    let mut d2 = d1 - 2.0;
    let mut sum = 0.0;
    for i in 1..=NMAX {
        let c = (-((2 * i - 1) as f64 * H).powi(2)).exp();
        sum += c * (e1 / d1 + 1.0 / (d2 * e1));
        d1 += 2.0;
        d2 -= 2.0;
        e1 *= e2;
    }
    let value = sum * (-xp * xp).exp() / PI.sqrt();
    value.copysign(x)
}

/// Result of fitting `ln y = c0 + c1 x + c2 x^2` around a peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub center: f64,
    /// Standard deviation of the fitted Gaussian `exp(-(x-center)^2 / (2 sigma^2))`.
    pub sigma: f64,
    pub peak: f64,
    /// RMS residual of the log-domain fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares log-parabola fit restricted to the contiguous region around
/// the maximum where `y >= floor_fraction * max`. Returns `None` when fewer
/// than three points qualify or the fitted curvature is not negative.
pub fn fit_log_parabola(xs: &[f64], ys: &[f64], floor_fraction: f64) -> Option<GaussianFit> {
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(ymax > 0.0) {
        return None;
    }
    let floor = floor_fraction * ymax;
    let mut lo = imax;
    while lo > 0 && ys[lo - 1] >= floor {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < ys.len() && ys[hi + 1] >= floor {
        hi += 1;
    }
    let n = hi - lo + 1;
    if n < 3 {
        return None;
    }
    // center abscissae on the peak for conditioning
    let x0 = xs[imax];
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for k in lo..=hi {
        let x = xs[k] - x0;
        let ly = ys[k].ln();
        let mut p = 1.0;
        for sk in s.iter_mut() {
            *sk += p;
            p *= x;
        }
        t[0] += ly;
        t[1] += ly * x;
        t[2] += ly * x * x;
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let c = solve3(m, t)?;
    if !(c[2] < 0.0) {
        return None;
    }
    let sigma = (-1.0 / (2.0 * c[2])).sqrt();
    let center_off = -c[1] / (2.0 * c[2]);
    let peak = (c[0] - c[1] * c[1] / (4.0 * c[2])).exp();
    let mut ss = 0.0;
    for k in lo..=hi {
        let x = xs[k] - x0;
        let r = ys[k].ln() - (c[0] + c[1] * x + c[2] * x * x);
        ss += r * r;
    }
    Some(GaussianFit {
        center: x0 + center_off,
        sigma,
        peak,
        residual: (ss / n as f64).sqrt(),
        points: n,
    })
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = b[row];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}

/// Direct Fourier sum `sum_k x_k exp(-i omega t_k) dt` over uniformly sampled
/// data, evaluated at each requested angular frequency.
pub fn fourier_at(grid: &UniformGrid, samples: &[f64], omegas: &[f64]) -> Vec<Complex64> {
    debug_assert_eq!(grid.len, samples.len());
    omegas
        .iter()
        .map(|&w| {
            let rot = Complex64::from_polar(1.0, -w * grid.step);
            let mut phase = Complex64::from_polar(1.0, -w * grid.start);
            let mut terms = Vec::with_capacity(samples.len());
            for (k, &x) in samples.iter().enumerate() {
                // re-anchor periodically to bound accumulated rounding
                if k % 256 == 0 {
                    phase = Complex64::from_polar(1.0, -w * grid.at(k));
                }
                terms.push(phase * x);
                phase *= rot;
            }
            pairwise_sum_complex(&terms) * grid.step
        })
        .collect()
}

/// Half-width at which a peaked, sampled profile falls to `level * peak`,
/// averaged over both flanks, with linear interpolation between samples.
pub fn half_width_at(grid: &UniformGrid, ys: &[f64], level: f64) -> Option<f64> {
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(ymax > 0.0) {
        return None;
    }
    let target = level * ymax;
    let mut right = None;
    for k in imax..ys.len() - 1 {
        if ys[k] >= target && ys[k + 1] < target {
            let t = (ys[k] - target) / (ys[k] - ys[k + 1]);
            right = Some(grid.at(k) + t * grid.step - grid.at(imax));
            break;
        }
    }
    let mut left = None;
    for k in (1..=imax).rev() {
        if ys[k] >= target && ys[k - 1] < target {
            let t = (ys[k] - target) / (ys[k] - ys[k - 1]);
            left = Some(grid.at(imax) - (grid.at(k) - t * grid.step));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Some(0.5 * (l + r)),
        (Some(w), None) | (None, Some(w)) => Some(w),
        (None, None) => None,
    }
}
