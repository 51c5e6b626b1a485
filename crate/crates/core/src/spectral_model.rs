//! Joint spectral amplitudes, their exchange symmetry, and the collective
//! coordinate densities and correlation functions derived from them.
//!
//! Frequencies are angular. Detunings are measured from half the pump
//! frequency: `Ωs = ωs - ωp/2`, `Ωi = ωi - ωp/2`, with collective coordinates
//! `Ω+ = Ωs + Ωi` and `Ω- = Ωs - Ωi`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{interp_bicubic, interp_cubic, pairwise_sum, pairwise_sum_complex, UniformGrid};

/// Minimum ratio `ωp / max(σ+, σ-)` accepted by the constructors.
pub const MIN_PUMP_RATIO: f64 = 10.0;
/// Relative Frobenius residual allowed by the rank-1 factorizability test.
pub const FACTORIZABLE_TOL: f64 = 1e-6;
/// Edge-to-peak ratio above which a density grid counts as truncated.
pub const DENSITY_EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("NonPositiveParameter: {0}")]
    NonPositiveParameter(&'static str),
    #[error("PumpTooSmall: pump_frequency {pump} is below {min_ratio} x max linewidth {linewidth}")]
    PumpTooSmall { pump: f64, linewidth: f64, min_ratio: f64 },
    #[error("OutOfGridBounds: ({omega_s}, {omega_i}) lies outside the tabulated detuning grid")]
    OutOfGridBounds { omega_s: f64, omega_i: f64 },
    #[error("NotFactorizable: rank-1 residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotFactorizable { residual: f64, tolerance: f64 },
    #[error("GridTooNarrow: density edge value is {edge_ratio:.3e} of its peak")]
    GridTooNarrow { edge_ratio: f64 },
    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
    #[error("TableParse: {0}")]
    TableParse(String),
}

/// Behaviour under exchange of the signal and idler arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    #[default]
    Symmetric,
    Antisymmetric,
    Anyonic { phase: f64 },
}

impl Symmetry {
    /// Factor `e^{iφ}` relating `f(a, b)` to `f(b, a)`.
    pub fn exchange_factor(&self) -> Complex64 {
        match *self {
            Symmetry::Symmetric => Complex64::new(1.0, 0.0),
            Symmetry::Antisymmetric => Complex64::new(-1.0, 0.0),
            Symmetry::Anyonic { phase } => Complex64::from_polar(1.0, phase),
        }
    }

    /// Value factor on the exchange diagonal `Ωs = Ωi`.
    fn diagonal_factor(&self) -> Complex64 {
        (Complex64::new(1.0, 0.0) + self.exchange_factor()) * 0.5
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symmetry::Symmetric => write!(f, "symmetric"),
            Symmetry::Antisymmetric => write!(f, "antisymmetric"),
            Symmetry::Anyonic { phase } => write!(f, "anyonic({phase})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    Sum,
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JsaKind {
    GaussianProduct,
    TabulatedGrid,
}

/// Complex amplitude table over uniform `(Ωs, Ωi)` detuning axes, row-major
/// with `Ωs` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedGrid {
    pub omega_s: UniformGrid,
    pub omega_i: UniformGrid,
    pub values: Vec<Complex64>,
}

impl TabulatedGrid {
    #[inline]
    pub fn at(&self, s: usize, i: usize) -> Complex64 {
        self.values[s * self.omega_i.len + i]
    }

    /// `ΣΣ |f|² ΔΩs ΔΩi`.
    pub fn norm_squared(&self) -> f64 {
        let terms: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        pairwise_sum(&terms) * self.omega_s.step * self.omega_i.step
    }

    /// Bicubic Lagrange interpolation; `None` outside the table.
    fn interpolate(&self, ds: f64, di: f64) -> Option<Complex64> {
        interp_bicubic(&self.omega_s, &self.omega_i, &self.values, ds, di)
    }
}

/// A joint spectral amplitude `f(ωs, ωi)` with a declared exchange symmetry.
///
/// For tabulated models `sigma_plus` and `sigma_minus` hold the RMS widths
/// of `|f|²` along the collective coordinates, which equal the Gaussian
/// linewidths for a Gaussian table.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectralAmplitude {
    pub kind: JsaKind,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub pump_frequency: f64,
    pub symmetry: Symmetry,
    pub grid: Option<Arc<TabulatedGrid>>,
}

/// Builds the Gaussian product model `exp(-Ω+²/4σ+²) exp(-Ω-²/4σ-²)`.
///
/// The Gaussian is symmetric under exchange. Other symmetries reuse its
/// modulus: the antisymmetric model is `sign(Ωs - Ωi)` times it, the anyonic
/// model multiplies the `Ωs > Ωi` half-plane by `e^{iφ}`.
pub fn make_gaussian_jsa(
    sigma_plus: f64,
    sigma_minus: f64,
    pump_frequency: f64,
    symmetry: Symmetry,
) -> Result<JointSpectralAmplitude, ModelError> {
    check_positive(sigma_plus, "sigma_plus")?;
    check_positive(sigma_minus, "sigma_minus")?;
    check_positive(pump_frequency, "pump_frequency")?;
    check_pump(pump_frequency, sigma_plus.max(sigma_minus))?;
    if let Symmetry::Anyonic { phase } = symmetry {
        if !phase.is_finite() {
            return Err(ModelError::InvalidGrid("anyonic phase must be finite".into()));
        }
    }
    Ok(JointSpectralAmplitude {
        kind: JsaKind::GaussianProduct,
        sigma_plus,
        sigma_minus,
        pump_frequency,
        symmetry,
        grid: None,
    })
}

fn check_positive(x: f64, name: &'static str) -> Result<(), ModelError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveParameter(name))
    }
}

fn check_pump(pump: f64, linewidth: f64) -> Result<(), ModelError> {
    if pump < MIN_PUMP_RATIO * linewidth {
        Err(ModelError::PumpTooSmall {
            pump,
            linewidth,
            min_ratio: MIN_PUMP_RATIO,
        })
    } else {
        Ok(())
    }
}

impl JointSpectralAmplitude {
    /// Builds a tabulated model from a complex table over detuning axes.
    ///
    /// The table is projected onto the declared symmetry (the two axes must
    /// then coincide) and rescaled to unit L2 norm.
    pub fn tabulated(
        omega_s: UniformGrid,
        omega_i: UniformGrid,
        values: Vec<Complex64>,
        pump_frequency: f64,
        symmetry: Symmetry,
    ) -> Result<Self, ModelError> {
        check_positive(pump_frequency, "pump_frequency")?;
        if omega_s.len < 4 || omega_i.len < 4 {
            return Err(ModelError::InvalidGrid("tabulated grid needs at least 4 points per axis".into()));
        }
        if values.len() != omega_s.len * omega_i.len {
            return Err(ModelError::InvalidGrid(format!(
                "expected {} values, found {}",
                omega_s.len * omega_i.len,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(ModelError::InvalidGrid("non-finite amplitude".into()));
        }
        let same_axes = omega_s.len == omega_i.len
            && (omega_s.start - omega_i.start).abs() <= 1e-12 * omega_s.step.abs().max(omega_s.start.abs())
            && (omega_s.step - omega_i.step).abs() <= 1e-12 * omega_s.step;
        if !same_axes {
            return Err(ModelError::InvalidGrid(
                "signal and idler axes must coincide so the exchange symmetry can be imposed".into(),
            ));
        }
        let n = omega_s.len;
        let mut projected = values.clone();
        let x = symmetry.exchange_factor();
        for s in 0..n {
            for i in 0..n {
                let v = values[s * n + i];
                let t = values[i * n + s];
                projected[s * n + i] = match symmetry {
                    Symmetry::Symmetric => (v + t) * 0.5,
                    Symmetry::Antisymmetric => (v - t) * 0.5,
                    Symmetry::Anyonic { .. } => {
                        if s < i {
                            v
                        } else if s > i {
                            x * t
                        } else {
                            v * symmetry.diagonal_factor()
                        }
                    }
                };
            }
        }
        let mut grid = TabulatedGrid {
            omega_s,
            omega_i: omega_s,
            values: projected,
        };
        let norm = grid.norm_squared();
        if !(norm > 0.0) {
            return Err(ModelError::InvalidGrid("table is identically zero after symmetrization".into()));
        }
        let scale = 1.0 / norm.sqrt();
        for v in grid.values.iter_mut() {
            *v *= scale;
        }
        let (sp, sm) = rms_widths(&grid);
        check_positive(sp, "sigma_plus")?;
        check_positive(sm, "sigma_minus")?;
        check_pump(pump_frequency, sp.max(sm))?;
        Ok(Self {
            kind: JsaKind::TabulatedGrid,
            sigma_plus: sp,
            sigma_minus: sm,
            pump_frequency,
            symmetry,
            grid: Some(Arc::new(grid)),
        })
    }

    /// Loads a table from CSV with header `omega_s,omega_i,re,im`, rows ordered
    /// with `omega_s` slow and `omega_i` fast. Columns are detunings.
    pub fn from_csv(path: &Path, pump_frequency: f64, symmetry: Symmetry) -> Result<Self, ModelError> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| ModelError::TableParse(e.to_string()))?;
        let headers = reader.headers().map_err(|e| ModelError::TableParse(e.to_string()))?.clone();
        let expected = ["omega_s", "omega_i", "re", "im"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(ModelError::TableParse(format!(
                "expected header omega_s,omega_i,re,im, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| ModelError::TableParse(e.to_string()))?;
            let mut row = [0.0; 4];
            for (k, field) in record.iter().enumerate().take(4) {
                row[k] = field.trim().parse().map_err(|_| {
                    ModelError::TableParse(format!("row {}: cannot parse {:?}", line + 2, field))
                })?;
            }
            if record.len() != 4 {
                return Err(ModelError::TableParse(format!("row {}: expected 4 fields", line + 2)));
            }
            rows.push(row);
        }
        Self::from_rows(&rows, pump_frequency, symmetry)
    }

    /// Builds a tabulated model from `(Ωs, Ωi, re, im)` rows in row-major order.
    pub fn from_rows(rows: &[[f64; 4]], pump_frequency: f64, symmetry: Symmetry) -> Result<Self, ModelError> {
        if rows.is_empty() {
            return Err(ModelError::TableParse("empty table".into()));
        }
        let first_s = rows[0][0];
        let ni = rows.iter().take_while(|r| r[0] == first_s).count();
        if ni < 2 || !rows.len().is_multiple_of(ni) {
            return Err(ModelError::InvalidGrid("table is not rectangular".into()));
        }
        let ns = rows.len() / ni;
        let s_axis: Vec<f64> = (0..ns).map(|k| rows[k * ni][0]).collect();
        let i_axis: Vec<f64> = rows[..ni].iter().map(|r| r[1]).collect();
        for (k, r) in rows.iter().enumerate() {
            if r[0] != s_axis[k / ni] || r[1] != i_axis[k % ni] {
                return Err(ModelError::InvalidGrid(format!("row {} breaks the rectangular layout", k + 2)));
            }
        }
        let gs = UniformGrid::from_samples(&s_axis)
            .ok_or_else(|| ModelError::InvalidGrid("omega_s axis is not uniform and increasing".into()))?;
        let gi = UniformGrid::from_samples(&i_axis)
            .ok_or_else(|| ModelError::InvalidGrid("omega_i axis is not uniform and increasing".into()))?;
        let values = rows.iter().map(|r| Complex64::new(r[2], r[3])).collect();
        Self::tabulated(gs, gi, values, pump_frequency, symmetry)
    }

    pub fn is_gaussian(&self) -> bool {
        self.kind == JsaKind::GaussianProduct
    }

    pub fn linewidth(&self, coordinate: Coordinate) -> f64 {
        match coordinate {
            Coordinate::Sum => self.sigma_plus,
            Coordinate::Difference => self.sigma_minus,
        }
    }

    /// Half-width of the detuning box holding the amplitude, per collective
    /// coordinate (`8σ` for Gaussians, the table extent otherwise).
    pub fn support(&self, coordinate: Coordinate) -> f64 {
        match &self.grid {
            None => 8.0 * self.linewidth(coordinate),
            Some(g) => {
                let ext = g.omega_s.start.abs().max(g.omega_s.end().abs());
                2.0 * ext
            }
        }
    }

    /// Amplitude at absolute frequencies; see [`JointSpectralAmplitude::evaluate_detuned`].
    pub fn evaluate(&self, omega_s: f64, omega_i: f64) -> Result<Complex64, ModelError> {
        let half = 0.5 * self.pump_frequency;
        self.evaluate_detuned(omega_s - half, omega_i - half)
    }

    /// Amplitude at detunings `(Ωs, Ωi)`.
    pub fn evaluate_detuned(&self, ds: f64, di: f64) -> Result<Complex64, ModelError> {
        match &self.grid {
            None => Ok(self.gaussian_detuned(ds, di)),
            Some(g) => {
                // evaluate on the Ωs <= Ωi side and map across so the exchange
                // identity holds bit for bit
                if ds > di {
                    let base = g
                        .interpolate(di, ds)
                        .ok_or(ModelError::OutOfGridBounds { omega_s: ds, omega_i: di })?;
                    Ok(self.symmetry.exchange_factor() * base)
                } else if ds == di && self.symmetry == Symmetry::Antisymmetric {
                    if g.omega_s.contains(ds) {
                        Ok(Complex64::new(0.0, 0.0))
                    } else {
                        Err(ModelError::OutOfGridBounds { omega_s: ds, omega_i: di })
                    }
                } else {
                    g.interpolate(ds, di)
                        .ok_or(ModelError::OutOfGridBounds { omega_s: ds, omega_i: di })
                }
            }
        }
    }

    #[inline]
    fn gaussian_detuned(&self, ds: f64, di: f64) -> Complex64 {
        let wp = ds + di;
        let wm = ds - di;
        let g = (-wp * wp / (4.0 * self.sigma_plus * self.sigma_plus) - wm * wm / (4.0 * self.sigma_minus * self.sigma_minus))
            .exp();
        match self.symmetry {
            Symmetry::Symmetric => Complex64::new(g, 0.0),
            Symmetry::Antisymmetric => {
                if wm > 0.0 {
                    Complex64::new(g, 0.0)
                } else if wm < 0.0 {
                    Complex64::new(-g, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Symmetry::Anyonic { phase } => {
                if wm > 0.0 {
                    Complex64::from_polar(g, phase)
                } else if wm < 0.0 {
                    Complex64::new(g, 0.0)
                } else {
                    self.symmetry.diagonal_factor() * g
                }
            }
        }
    }

    /// `|f|²` in collective coordinates `(Ω+, Ω-)`.
    pub fn intensity_collective(&self, wp: f64, wm: f64) -> Result<f64, ModelError> {
        Ok(self.evaluate_detuned(0.5 * (wp + wm), 0.5 * (wp - wm))?.norm_sqr())
    }
}

/// RMS widths of `|f|²` along `Ω+` and `Ω-` for a table.
fn rms_widths(g: &TabulatedGrid) -> (f64, f64) {
    let n_s = g.omega_s.len;
    let n_i = g.omega_i.len;
    let mut w = Vec::with_capacity(n_s * n_i);
    let mut p1 = Vec::with_capacity(n_s * n_i);
    let mut m1 = Vec::with_capacity(n_s * n_i);
    let mut p2 = Vec::with_capacity(n_s * n_i);
    let mut m2 = Vec::with_capacity(n_s * n_i);
    for s in 0..n_s {
        for i in 0..n_i {
            let q = g.at(s, i).norm_sqr();
            let wp = g.omega_s.at(s) + g.omega_i.at(i);
            let wm = g.omega_s.at(s) - g.omega_i.at(i);
            w.push(q);
            p1.push(q * wp);
            m1.push(q * wm);
            p2.push(q * wp * wp);
            m2.push(q * wm * wm);
        }
    }
    let z = pairwise_sum(&w);
    let mp = pairwise_sum(&p1) / z;
    let mm = pairwise_sum(&m1) / z;
    let vp = (pairwise_sum(&p2) / z - mp * mp).max(0.0);
    let vm = (pairwise_sum(&m2) / z - mm * mm).max(0.0);
    (vp.sqrt(), vm.sqrt())
}

/// Sampled `F(Ω±) = |f(Ω±)|²` on a uniform detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub coordinate: Coordinate,
    pub detunings: UniformGrid,
    pub values: Vec<f64>,
}

impl SpectralDensity {
    pub fn new(coordinate: Coordinate, detunings: UniformGrid, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != detunings.len {
            return Err(ModelError::InvalidGrid(format!(
                "{} values for {} detunings",
                values.len(),
                detunings.len
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ModelError::InvalidGrid("density values must be finite and nonnegative".into()));
        }
        Ok(Self {
            coordinate,
            detunings,
            values,
        })
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Copy rescaled to unit peak.
    pub fn unit_peak(&self) -> Self {
        let p = self.peak();
        let mut out = self.clone();
        if p > 0.0 {
            for v in out.values.iter_mut() {
                *v /= p;
            }
        }
        out
    }
}

/// Samples the collective-coordinate density on `grid`.
///
/// Gaussian models give `exp(-Ω²/2σ²)`. Tabulated models must pass the rank-1
/// test; the result is the marginal of `|f|²` along the other coordinate,
/// scaled to unit peak.
pub fn spectral_density(
    jsa: &JointSpectralAmplitude,
    coordinate: Coordinate,
    grid: UniformGrid,
) -> Result<SpectralDensity, ModelError> {
    match &jsa.grid {
        None => {
            let sigma = jsa.linewidth(coordinate);
            let values = grid
                .values()
                .into_iter()
                .map(|w| (-w * w / (2.0 * sigma * sigma)).exp())
                .collect();
            SpectralDensity::new(coordinate, grid, values)
        }
        Some(table) => {
            let residual = factorization_residual(table)?;
            if residual > FACTORIZABLE_TOL {
                return Err(ModelError::NotFactorizable {
                    residual,
                    tolerance: FACTORIZABLE_TOL,
                });
            }
            let ext = 2.0 * table.omega_s.start.abs().max(table.omega_s.end().abs());
            let h = table.omega_s.step;
            let m = (ext / h).ceil() as usize;
            let other: Vec<f64> = (0..=2 * m).map(|k| (k as f64 - m as f64) * h).collect();
            let mut values = Vec::with_capacity(grid.len);
            for w in grid.values() {
                let mut col = Vec::with_capacity(other.len());
                for &o in &other {
                    let (wp, wm) = match coordinate {
                        Coordinate::Sum => (w, o),
                        Coordinate::Difference => (o, w),
                    };
                    col.push(jsa.intensity_collective(wp, wm).unwrap_or(0.0));
                }
                values.push(pairwise_sum(&col) * h);
            }
            let d = SpectralDensity::new(coordinate, grid, values)?;
            Ok(d.unit_peak())
        }
    }
}

/// Relative Frobenius residual of the best rank-1 approximation of `|f|²`
/// sampled on the rotated sub-lattice `(Ω+, Ω-)` that coincides exactly with
/// table nodes.
pub fn factorization_residual(table: &TabulatedGrid) -> Result<f64, ModelError> {
    let n = table.omega_s.len.min(table.omega_i.len);
    if (table.omega_s.step - table.omega_i.step).abs() > 1e-12 * table.omega_s.step {
        return Err(ModelError::InvalidGrid("factorizability test needs equal axis spacing".into()));
    }
    // nodes (a, b) with a + b = c + p, a - b = q, p and q stepping by 2 keep
    // both indices integral
    let c = (n - 1) as i64;
    let half = c / 2;
    let k_max = half / 2;
    if k_max < 1 {
        return Err(ModelError::InvalidGrid("table too small for the factorizability test".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let offs: Vec<i64> = (-k_max..=k_max).map(|k| 2 * k).collect();
    let parity = c % 2;
    for &p in &offs {
        let mut row = Vec::with_capacity(offs.len());
        for &q in &offs {
            let sum = c + p;
            let diff = q + parity;
            let a2 = sum + diff;
            let b2 = sum - diff;
            if a2 % 2 != 0 || b2 % 2 != 0 {
                return Err(ModelError::InvalidGrid("rotated lattice parity mismatch".into()));
            }
            let (a, b) = (a2 / 2, b2 / 2);
            if a < 0 || b < 0 || a > c || b > c {
                row.push(0.0);
            } else {
                row.push(table.at(a as usize, b as usize).norm_sqr());
            }
        }
        rows.push(row);
    }
    Ok(rank1_residual(&rows))
}

/// `‖M - s u vᵀ‖_F / ‖M‖_F` for the dominant singular triple, by power iteration.
pub fn rank1_residual(m: &[Vec<f64>]) -> f64 {
    let r = m.len();
    let c = m.first().map_or(0, |row| row.len());
    let total: f64 = m.iter().flatten().map(|x| x * x).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (c as f64).sqrt(); c];
    let mut u = vec![0.0; r];
    let mut s = 0.0;
    for _ in 0..500 {
        for i in 0..r {
            u[i] = m[i].iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu == 0.0 {
            break;
        }
        u.iter_mut().for_each(|x| *x /= nu);
        let mut nv = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                nv[j] += m[i][j] * u[i];
            }
        }
        let s_new = nv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if s_new == 0.0 {
            break;
        }
        nv.iter_mut().for_each(|x| *x /= s_new);
        let done = (s_new - s).abs() <= 1e-15 * s_new;
        s = s_new;
        v = nv;
        if done {
            break;
        }
    }
    // ‖M - s u vᵀ‖² = ‖M‖² - s² for the exact singular triple
    let mut res = 0.0;
    for i in 0..r {
        for j in 0..c {
            let d = m[i][j] - s * u[i] * v[j];
            res += d * d;
        }
    }
    (res / total).sqrt()
}

/// Normalized correlation `G(τ)/G(0)` sampled on a delay grid, with the
/// real part `g(τ)` stored alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFunction {
    pub coordinate: Coordinate,
    pub delays: UniformGrid,
    pub g_values: Vec<f64>,
    /// `G(τ)/G(0)` including the imaginary part.
    pub ratio: Vec<Complex64>,
    /// `G(0)` in the Fourier convention `(1/√2π) ∫ F e^{iΩτ} dΩ`.
    pub g0: f64,
}

impl CorrelationFunction {
    /// Analytic Gaussian correlation `exp(-σ²τ²/2)` sampled on `delays`.
    pub fn gaussian(coordinate: Coordinate, sigma: f64, delays: UniformGrid) -> Self {
        let ratio: Vec<Complex64> = delays
            .values()
            .into_iter()
            .map(|t| Complex64::new((-sigma * sigma * t * t / 2.0).exp(), 0.0))
            .collect();
        Self {
            coordinate,
            delays,
            g_values: ratio.iter().map(|z| z.re).collect(),
            ratio,
            g0: sigma,
        }
    }

    /// Complex `G(τ)/G(0)` at any delay covered by the grid, using `G(-τ) = G(τ)*`
    /// when only the mirror delay is tabulated.
    pub fn ratio_at(&self, tau: f64) -> Option<Complex64> {
        if tau == 0.0 {
            return Some(Complex64::new(1.0, 0.0));
        }
        if let Some(z) = interp_cubic(&self.delays, &self.ratio, tau) {
            return Some(z);
        }
        interp_cubic(&self.delays, &self.ratio, -tau).map(|z| z.conj())
    }

    /// `g(τ) = Re[G(τ)/G(0)]`.
    pub fn g_at(&self, tau: f64) -> Option<f64> {
        self.ratio_at(tau).map(|z| z.re)
    }

    /// `Re[e^{iωp τ} G(τ)/G(0)]`, the carrier-bearing form used for the sum coordinate.
    pub fn g_with_carrier(&self, pump_frequency: f64, tau: f64) -> Option<f64> {
        self.ratio_at(tau)
            .map(|z| (Complex64::from_polar(1.0, pump_frequency * tau) * z).re)
    }
}

/// Fourier transform of a density onto a delay grid, normalized by `G(0)`.
pub fn correlation_function(
    density: &SpectralDensity,
    delays: UniformGrid,
) -> Result<CorrelationFunction, ModelError> {
    let peak = density.peak();
    if !(peak > 0.0) {
        return Err(ModelError::InvalidGrid("density is identically zero".into()));
    }
    let n = density.values.len();
    let edge = density.values[0].max(density.values[n - 1]) / peak;
    if edge > DENSITY_EDGE_TOL {
        return Err(ModelError::GridTooNarrow { edge_ratio: edge });
    }
    let norm = 1.0 / (2.0 * PI).sqrt();
    let h = density.detunings.step;
    let g0 = pairwise_sum(&density.values) * h * norm;
    let omegas = density.detunings;
    let ratio: Vec<Complex64> = delays
        .values()
        .into_iter()
        .map(|tau| {
            if tau == 0.0 {
                return Complex64::new(1.0, 0.0);
            }
            let terms: Vec<Complex64> = density
                .values
                .iter()
                .enumerate()
                .map(|(k, &v)| Complex64::from_polar(v, omegas.at(k) * tau))
                .collect();
            pairwise_sum_complex(&terms) * (h * norm / g0)
        })
        .collect();
    Ok(CorrelationFunction {
        coordinate: density.coordinate,
        delays,
        g_values: ratio.iter().map(|z| z.re).collect(),
        ratio,
        g0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(sp: f64, sm: f64, sym: Symmetry) -> JointSpectralAmplitude {
        make_gaussian_jsa(sp, sm, 200.0, sym).unwrap()
    }

    #[test]
    fn gaussian_peak_and_offaxis_value() {
        let j = gauss(1.0, 1.0, Symmetry::Symmetric);
        assert_eq!(j.evaluate(100.0, 100.0).unwrap(), Complex64::new(1.0, 0.0));
        let v = j.evaluate_detuned(1.0, -1.0).unwrap();
        assert!((v.re - (-1.0f64).exp()).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn constructor_validation() {
        assert_eq!(
            make_gaussian_jsa(0.0, 1.0, 200.0, Symmetry::Symmetric).unwrap_err().to_string(),
            "NonPositiveParameter: sigma_plus"
        );
        assert!(matches!(
            make_gaussian_jsa(1.0, -2.0, 200.0, Symmetry::Symmetric),
            Err(ModelError::NonPositiveParameter("sigma_minus"))
        ));
        assert!(matches!(
            make_gaussian_jsa(1.0, 10.0, 50.0, Symmetry::Symmetric),
            Err(ModelError::PumpTooSmall { .. })
        ));
        assert!(make_gaussian_jsa(1.0, 10.0, 100.0, Symmetry::Symmetric).is_ok());
    }

    #[test]
    fn antisymmetric_diagonal_is_zero() {
        let j = gauss(1.0, 3.0, Symmetry::Antisymmetric);
        assert_eq!(j.evaluate(101.3, 101.3).unwrap(), Complex64::new(0.0, 0.0));
        let a = j.evaluate(100.2, 99.1).unwrap();
        let b = j.evaluate(99.1, 100.2).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn anyonic_exchange_phase() {
        let phase = 0.7;
        let j = gauss(1.0, 2.0, Symmetry::Anyonic { phase });
        let a = j.evaluate_detuned(0.4, -0.3).unwrap();
        let b = j.evaluate_detuned(-0.3, 0.4).unwrap();
        assert!((a - Complex64::from_polar(1.0, phase) * b).norm() < 1e-15);
    }

    #[test]
    fn density_values() {
        let j = gauss(1.0, 10.0, Symmetry::Symmetric);
        let g = UniformGrid::linspace(-10.0, 10.0, 21).unwrap();
        let d = spectral_density(&j, Coordinate::Sum, g).unwrap();
        assert_eq!(d.values[10], 1.0);
        assert!((d.values[11] - (-0.5f64).exp()).abs() < 1e-15);
        let g = UniformGrid::linspace(-80.0, 80.0, 17).unwrap();
        let d = spectral_density(&j, Coordinate::Difference, g).unwrap();
        assert!((d.values[9] - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn correlation_of_gaussian_density() {
        let j = gauss(1.0, 1.0, Symmetry::Symmetric);
        let g = UniformGrid::symmetric(8.0, 4097).unwrap();
        let d = spectral_density(&j, Coordinate::Sum, g).unwrap();
        let taus = UniformGrid::linspace(0.0, 5.0, 6).unwrap();
        let c = correlation_function(&d, taus).unwrap();
        assert_eq!(c.g_values[0], 1.0);
        assert!((c.g_values[1] - (-0.5f64).exp()).abs() < 1e-10);
        assert!((c.g_values[5] - (-12.5f64).exp()).abs() < 1e-10);
        let narrow = spectral_density(&j, Coordinate::Sum, UniformGrid::symmetric(3.0, 101).unwrap()).unwrap();
        assert!(matches!(
            correlation_function(&narrow, taus),
            Err(ModelError::GridTooNarrow { .. })
        ));
    }

    fn gaussian_rows(sp: f64, sm: f64, n: usize, half: f64) -> Vec<[f64; 4]> {
        let g = UniformGrid::symmetric(half, n).unwrap();
        let mut rows = Vec::new();
        for a in g.values() {
            for b in g.values() {
                let v = (-(a + b).powi(2) / (4.0 * sp * sp) - (a - b).powi(2) / (4.0 * sm * sm)).exp();
                rows.push([a, b, v, 0.0]);
            }
        }
        rows
    }

    #[test]
    fn tabulated_normalization_and_widths() {
        let rows = gaussian_rows(1.0, 2.0, 161, 10.0);
        let j = JointSpectralAmplitude::from_rows(&rows, 200.0, Symmetry::Symmetric).unwrap();
        let g = j.grid.as_ref().unwrap();
        assert!((g.norm_squared() - 1.0).abs() < 1e-9);
        assert!((j.sigma_plus - 1.0).abs() < 1e-6);
        assert!((j.sigma_minus - 2.0).abs() < 1e-6);
        let a = j.evaluate_detuned(0.31, -1.7).unwrap();
        let b = j.evaluate_detuned(-1.7, 0.31).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tabulated_rank1_detects_non_factorizable() {
        let rows = gaussian_rows(1.0, 2.0, 81, 10.0);
        let j = JointSpectralAmplitude::from_rows(&rows, 200.0, Symmetry::Symmetric).unwrap();
        assert!(factorization_residual(j.grid.as_ref().unwrap()).unwrap() < 1e-9);
        let g = UniformGrid::symmetric(10.0, 81).unwrap();
        let mut mixed = Vec::new();
        for a in g.values() {
            for b in g.values() {
                let v = (-(a * a + b * b) / 2.0).exp() + 0.6 * (-((a - 3.0).powi(2) + (b - 3.0).powi(2)) / 0.5).exp();
                mixed.push([a, b, v, 0.0]);
            }
        }
        let j = JointSpectralAmplitude::from_rows(&mixed, 200.0, Symmetry::Symmetric).unwrap();
        let err = spectral_density(&j, Coordinate::Sum, UniformGrid::symmetric(5.0, 11).unwrap()).unwrap_err();
        assert!(matches!(err, ModelError::NotFactorizable { .. }));
    }

    #[test]
    fn tabulated_density_matches_gaussian() {
        let rows = gaussian_rows(1.0, 1.5, 241, 9.0);
        let j = JointSpectralAmplitude::from_rows(&rows, 200.0, Symmetry::Symmetric).unwrap();
        let grid = UniformGrid::symmetric(3.0, 13).unwrap();
        let d = spectral_density(&j, Coordinate::Difference, grid).unwrap();
        for (w, v) in grid.values().iter().zip(&d.values) {
            assert!((v - (-w * w / (2.0 * 1.5 * 1.5)).exp()).abs() < 1e-6, "{w}: {v}");
        }
    }

    #[test]
    fn ragged_table_rejected() {
        let mut rows = gaussian_rows(1.0, 1.0, 11, 5.0);
        rows.pop();
        assert!(JointSpectralAmplitude::from_rows(&rows, 200.0, Symmetry::Symmetric).is_err());
    }
}
