//! Frequency-domain coincidence rates.
//!
//! Three routes are provided: direct quadrature of the two-photon density,
//! the factorized form in terms of the collective correlation functions, and
//! its Gaussian closed form with the two asymptotic regimes. The baseline
//! HOM and NOON interferometers share the quadrature machinery.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EngineChoice, ScanAxis, ScanConfig};
use crate::numeric::{gauss_legendre_panels, pairwise_sum, UniformGrid};
use crate::spectral_model::{CorrelationFunction, JointSpectralAmplitude, JsaKind, ModelError, Symmetry};
use crate::time_engine::{self, TimeError, TimeGrid};

/// Threshold on `σ|τ|` used by the asymptotic forms.
pub const ASYMPTOTIC_MIN: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("QuadratureUnderResolved: frequency spacing {spacing:.4e} exceeds pi/(4 D) = {limit:.4e}")]
    QuadratureUnderResolved { spacing: f64, limit: f64 },
    #[error("DelayOutsideTabulatedRange: delay {tau} is not covered by the correlation grid")]
    DelayOutsideTabulatedRange { tau: f64 },
    #[error("AsymptoticPreconditionViolated: {0}")]
    AsymptoticPreconditionViolated(String),
    #[error("NyquistViolated: delay spacing {spacing:.4e} exceeds pi/(omega_p + 8 sigma_plus)/2 = {limit:.4e}")]
    NyquistViolated { spacing: f64, limit: f64 },
    #[error("ClosedFormUnsupported: {0}")]
    ClosedFormUnsupported(String),
    #[error("InvalidDelay: {0}")]
    InvalidDelay(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Time(#[from] TimeError),
}

/// NOON-arm delay `tau1` and HOM-arm delay `tau2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayPair {
    pub tau1: f64,
    pub tau2: f64,
}

impl DelayPair {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self, EngineError> {
        if !tau1.is_finite() || !tau2.is_finite() {
            return Err(EngineError::InvalidDelay(format!("({tau1}, {tau2}) is not finite")));
        }
        Ok(Self { tau1, tau2 })
    }

    /// Largest rate of phase change with respect to a collective detuning.
    pub fn phase_scale(&self) -> f64 {
        self.tau1.abs() + self.tau2.abs()
    }
}

/// Which detection arrangement is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interferometer {
    Combined,
    Hom,
    Noon,
}

/// `e^{-iω d}` for the three delays `τ1`, `τ2`, `τ1+τ2`.
#[derive(Clone, Copy)]
struct Phases {
    a: Complex64,
    b: Complex64,
    ab: Complex64,
}

impl Phases {
    fn at(omega: f64, d: &DelayPair) -> Self {
        Self {
            a: Complex64::from_polar(1.0, -omega * d.tau1),
            b: Complex64::from_polar(1.0, -omega * d.tau2),
            ab: Complex64::from_polar(1.0, -omega * (d.tau1 + d.tau2)),
        }
    }
}

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Interference amplitude and its no-interference reference for one
/// arrangement, given `f(ωs, ωi)`, `f(ωi, ωs)` and the phase factors.
#[inline]
fn amplitude(kind: Interferometer, f_si: Complex64, f_is: Complex64, s: &Phases, i: &Phases) -> (f64, f64) {
    let base = f_si.norm_sqr() + f_is.norm_sqr();
    match kind {
        Interferometer::Combined => {
            let p = s.ab + s.a + s.b - ONE;
            let q = i.ab - i.a - i.b - ONE;
            let p2 = i.ab + i.b - i.a + ONE;
            let q2 = s.ab - s.b + s.a + ONE;
            ((f_si * p * q + f_is * p2 * q2).norm_sqr(), 16.0 * base)
        }
        Interferometer::Hom => ((f_is * s.a - f_si * i.a).norm_sqr(), base),
        Interferometer::Noon => {
            let v = f_is * (i.a + ONE) * (s.a + ONE) + f_si * (s.a - ONE) * (i.a - ONE);
            (v.norm_sqr(), 4.0 * base)
        }
    }
}

/// Two-photon coincidence density `r(ωs, ωi; τ1, τ2)` of the combined interferometer.
pub fn coincidence_density(
    jsa: &JointSpectralAmplitude,
    omega_s: f64,
    omega_i: f64,
    delays: DelayPair,
) -> Result<f64, ModelError> {
    let f_si = jsa.evaluate(omega_s, omega_i)?;
    let f_is = jsa.evaluate(omega_i, omega_s)?;
    let s = Phases::at(omega_s, &delays);
    let i = Phases::at(omega_i, &delays);
    Ok(amplitude(Interferometer::Combined, f_si, f_is, &s, &i).0)
}

/// Density with every interference term dropped, `16(|f(ωs,ωi)|² + |f(ωi,ωs)|²)`.
pub fn baseline_density(jsa: &JointSpectralAmplitude, omega_s: f64, omega_i: f64) -> Result<f64, ModelError> {
    let f_si = jsa.evaluate(omega_s, omega_i)?;
    let f_is = jsa.evaluate(omega_i, omega_s)?;
    Ok(16.0 * (f_si.norm_sqr() + f_is.norm_sqr()))
}

/// Settings of the frequency quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Gauss-Legendre nodes per panel.
    pub nodes_per_panel: usize,
    /// Half-width of the integration box in units of the linewidth.
    pub box_sigmas: f64,
    /// Upper bound on panels per axis; exceeding it is reported as under-resolution.
    pub max_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes_per_panel: 16,
            box_sigmas: 8.0,
            max_panels: 4096,
        }
    }
}

/// Unnormalized rate together with its no-interference baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRate {
    pub value: f64,
    pub baseline: f64,
    /// Richardson estimate of the absolute error of `value` (tabulated models only).
    pub error_estimate: Option<f64>,
}

impl RawRate {
    pub fn normalize(&self) -> f64 {
        self.value / self.baseline
    }
}

/// Largest phase rate in a detuning direction for the given arrangement.
fn phase_scale(kind: Interferometer, delays: &DelayPair) -> f64 {
    match kind {
        Interferometer::Combined => delays.phase_scale(),
        Interferometer::Hom | Interferometer::Noon => delays.tau1.abs(),
    }
}

fn integrate(
    jsa: &JointSpectralAmplitude,
    delays: DelayPair,
    kind: Interferometer,
    quad: &QuadratureSpec,
) -> Result<RawRate, EngineError> {
    let scale = phase_scale(kind, &delays);
    match jsa.kind {
        JsaKind::GaussianProduct => integrate_rotated(jsa, delays, kind, quad, scale),
        JsaKind::TabulatedGrid => integrate_table(jsa, delays, kind, scale),
    }
}

/// Gauss-Legendre panels in `(Ω+, Ω-)`; the box is symmetric with an even
/// panel count so `Ω- = 0`, where non-symmetric models jump, is a panel edge.
fn integrate_rotated(
    jsa: &JointSpectralAmplitude,
    delays: DelayPair,
    kind: Interferometer,
    quad: &QuadratureSpec,
    scale: f64,
) -> Result<RawRate, EngineError> {
    let n = quad.nodes_per_panel.max(2);
    let axis = |sigma: f64| -> Result<(Vec<f64>, Vec<f64>), EngineError> {
        let half = quad.box_sigmas * sigma;
        let mut width = sigma;
        if scale > 0.0 {
            width = width.min(n as f64 * PI / (4.0 * scale));
        }
        let mut panels = (2.0 * half / width).ceil() as usize;
        panels += panels % 2;
        panels = panels.max(2);
        if panels > quad.max_panels {
            return Err(EngineError::QuadratureUnderResolved {
                spacing: 2.0 * half / (quad.max_panels * n) as f64,
                limit: PI / (4.0 * scale),
            });
        }
        Ok(gauss_legendre_panels(-half, half, panels, n))
    };
    let (xp, wp) = axis(jsa.sigma_plus)?;
    let (xm, wm) = axis(jsa.sigma_minus)?;
    let pump = jsa.pump_frequency;
    let ds = [delays.tau1, delays.tau2, delays.tau1 + delays.tau2];
    // ωs d = (ωp + Ω+) d/2 + Ω- d/2 and ωi d = (ωp + Ω+) d/2 - Ω- d/2
    let minus: Vec<[Complex64; 3]> = xm
        .iter()
        .map(|&w| ds.map(|d| Complex64::from_polar(1.0, -w * d / 2.0)))
        .collect();
    let rows: Vec<Result<(f64, f64), ModelError>> = xp
        .par_iter()
        .zip(wp.par_iter())
        .map(|(&p, &w_p)| {
            let plus = ds.map(|d| Complex64::from_polar(1.0, -(pump + p) * d / 2.0));
            let mut vals = Vec::with_capacity(xm.len());
            let mut bases = Vec::with_capacity(xm.len());
            for ((&m, &w_m), mp) in xm.iter().zip(&wm).zip(&minus) {
                let det_s = 0.5 * (p + m);
                let det_i = 0.5 * (p - m);
                let f_si = jsa.evaluate_detuned(det_s, det_i)?;
                let f_is = jsa.evaluate_detuned(det_i, det_s)?;
                let s = Phases {
                    a: plus[0] * mp[0],
                    b: plus[1] * mp[1],
                    ab: plus[2] * mp[2],
                };
                let i = Phases {
                    a: plus[0] * mp[0].conj(),
                    b: plus[1] * mp[1].conj(),
                    ab: plus[2] * mp[2].conj(),
                };
                let (r, b) = amplitude(kind, f_si, f_is, &s, &i);
                vals.push(w_m * r);
                bases.push(w_m * b);
            }
            Ok((w_p * pairwise_sum(&vals), w_p * pairwise_sum(&bases)))
        })
        .collect();
    let mut vals = Vec::with_capacity(rows.len());
    let mut bases = Vec::with_capacity(rows.len());
    for row in rows {
        let (v, b) = row?;
        vals.push(v);
        bases.push(b);
    }
    // dωs dωi = dΩ+ dΩ- / 2, and the 1/64 prefactor
    let prefactor = 0.5 / 64.0;
    Ok(RawRate {
        value: prefactor * pairwise_sum(&vals),
        baseline: prefactor * pairwise_sum(&bases),
        error_estimate: None,
    })
}

/// Trapezoid on the raw tabulated nodes with a step-doubling error estimate.
fn integrate_table(
    jsa: &JointSpectralAmplitude,
    delays: DelayPair,
    kind: Interferometer,
    scale: f64,
) -> Result<RawRate, EngineError> {
    let table = jsa.grid.as_ref().expect("tabulated model carries a grid");
    let gs = table.omega_s;
    let gi = table.omega_i;
    let spacing = gs.step.max(gi.step);
    if scale > 0.0 {
        let limit = PI / (4.0 * scale);
        if spacing > limit {
            return Err(EngineError::QuadratureUnderResolved { spacing, limit });
        }
    }
    let half = 0.5 * jsa.pump_frequency;
    let rows: Vec<Result<[f64; 4], ModelError>> = (0..gs.len)
        .into_par_iter()
        .map(|a| {
            let ds = gs.at(a);
            let mut fine = (Vec::with_capacity(gi.len), Vec::with_capacity(gi.len));
            let mut coarse = (Vec::new(), Vec::new());
            for b in 0..gi.len {
                let di = gi.at(b);
                let f_si = jsa.evaluate_detuned(ds, di)?;
                let f_is = jsa.evaluate_detuned(di, ds)?;
                let s = Phases::at(half + ds, &delays);
                let i = Phases::at(half + di, &delays);
                let (r, base) = amplitude(kind, f_si, f_is, &s, &i);
                let w = if b == 0 || b + 1 == gi.len { 0.5 } else { 1.0 };
                fine.0.push(w * r);
                fine.1.push(w * base);
                if b % 2 == 0 {
                    let wc = if b == 0 || b + 2 >= gi.len { 0.5 } else { 1.0 };
                    coarse.0.push(wc * r);
                    coarse.1.push(wc * base);
                }
            }
            Ok([
                pairwise_sum(&fine.0),
                pairwise_sum(&fine.1),
                pairwise_sum(&coarse.0),
                pairwise_sum(&coarse.1),
            ])
        })
        .collect();
    let mut fine_v = Vec::new();
    let mut fine_b = Vec::new();
    let mut coarse_v = Vec::new();
    let mut coarse_b = Vec::new();
    for (a, row) in rows.into_iter().enumerate() {
        let row = row?;
        let w = if a == 0 || a + 1 == gs.len { 0.5 } else { 1.0 };
        fine_v.push(w * row[0]);
        fine_b.push(w * row[1]);
        if a % 2 == 0 {
            let wc = if a == 0 || a + 2 >= gs.len { 0.5 } else { 1.0 };
            coarse_v.push(wc * row[2]);
            coarse_b.push(wc * row[3]);
        }
    }
    let area = gs.step * gi.step / 64.0;
    let value = area * pairwise_sum(&fine_v);
    let baseline = area * pairwise_sum(&fine_b);
    let coarse_value = 4.0 * area * pairwise_sum(&coarse_v);
    let coarse_base = 4.0 * area * pairwise_sum(&coarse_b);
    let err = (value / baseline - coarse_value / coarse_base).abs() / 3.0 * baseline;
    Ok(RawRate {
        value,
        baseline,
        error_estimate: Some(err),
    })
}

/// Quadrature of the combined-interferometer density over the detuning box.
pub fn rate_quadrature(
    jsa: &JointSpectralAmplitude,
    delays: DelayPair,
    quad: &QuadratureSpec,
) -> Result<RawRate, EngineError> {
    integrate(jsa, delays, Interferometer::Combined, quad)
}

/// Normalized HOM interferometer rate at delay `tau`.
pub fn homi_rate(jsa: &JointSpectralAmplitude, tau: f64, quad: &QuadratureSpec) -> Result<f64, EngineError> {
    Ok(integrate(jsa, DelayPair::new(tau, 0.0)?, Interferometer::Hom, quad)?.normalize())
}

/// Normalized NOON interferometer rate at delay `tau`.
pub fn nooni_rate(jsa: &JointSpectralAmplitude, tau: f64, quad: &QuadratureSpec) -> Result<f64, EngineError> {
    Ok(integrate(jsa, DelayPair::new(tau, 0.0)?, Interferometer::Noon, quad)?.normalize())
}

/// A normalized correlation `G(τ)/G(0)` of one collective coordinate.
pub trait Correlation {
    fn ratio(&self, tau: f64) -> Option<Complex64>;
}

impl Correlation for CorrelationFunction {
    fn ratio(&self, tau: f64) -> Option<Complex64> {
        self.ratio_at(tau)
    }
}

/// Analytic `exp(-σ²τ²/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCorrelation {
    pub sigma: f64,
}

impl Correlation for GaussianCorrelation {
    fn ratio(&self, tau: f64) -> Option<Complex64> {
        Some(Complex64::new((-self.sigma * self.sigma * tau * tau / 2.0).exp(), 0.0))
    }
}

/// Factorized rate
/// `1 - ½g+(τ1)g-(τ2) - ½g+(τ2) - ½g-(τ2) + ¼g+(τ2+τ1) + ¼g+(τ2-τ1)`,
/// with every `g+` carrying the pump carrier: `g+(τ) = Re[e^{iωpτ} G+(τ)/G+(0)]`.
pub fn rate_factorized(
    g_plus: &dyn Correlation,
    g_minus: &dyn Correlation,
    pump_frequency: f64,
    delays: DelayPair,
) -> Result<f64, EngineError> {
    let gp = |tau: f64| -> Result<f64, EngineError> {
        g_plus
            .ratio(tau)
            .map(|z| (Complex64::from_polar(1.0, pump_frequency * tau) * z).re)
            .ok_or(EngineError::DelayOutsideTabulatedRange { tau })
    };
    let gm = |tau: f64| -> Result<f64, EngineError> {
        g_minus
            .ratio(tau)
            .map(|z| z.re)
            .ok_or(EngineError::DelayOutsideTabulatedRange { tau })
    };
    let DelayPair { tau1, tau2 } = delays;
    Ok(1.0 - 0.5 * gp(tau1)? * gm(tau2)? - 0.5 * gp(tau2)? - 0.5 * gm(tau2)?
        + 0.25 * gp(tau2 + tau1)?
        + 0.25 * gp(tau2 - tau1)?)
}

#[inline]
fn gauss(sigma: f64, tau: f64) -> f64 {
    (-sigma * sigma * tau * tau / 2.0).exp()
}

/// Closed-form normalized rate for the symmetric Gaussian product model.
pub fn rate_gaussian_closed(sigma_plus: f64, sigma_minus: f64, pump_frequency: f64, delays: DelayPair) -> f64 {
    let (sp, sm, wp) = (sigma_plus, sigma_minus, pump_frequency);
    let DelayPair { tau1: t1, tau2: t2 } = delays;
    1.0 - 0.5 * (wp * t1).cos() * gauss(sp, t1) * gauss(sm, t2)
        - 0.5 * (wp * t2).cos() * gauss(sp, t2)
        - 0.5 * gauss(sm, t2)
        + 0.25 * (wp * (t2 + t1)).cos() * gauss(sp, t2 + t1)
        + 0.25 * (wp * (t2 - t1)).cos() * gauss(sp, t2 - t1)
}

/// Parameters of the Gaussian closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub pump_frequency: f64,
}

impl GaussianParams {
    pub fn from_jsa(jsa: &JointSpectralAmplitude) -> Self {
        Self {
            sigma_plus: jsa.sigma_plus,
            sigma_minus: jsa.sigma_minus,
            pump_frequency: jsa.pump_frequency,
        }
    }

    fn metadata(&self) -> ScanMetadata {
        ScanMetadata {
            kind: JsaKind::GaussianProduct,
            sigma_plus: self.sigma_plus,
            sigma_minus: self.sigma_minus,
            pump_frequency: self.pump_frequency,
            symmetry: Symmetry::Symmetric,
            delay_step: 0.0,
            delay_step_2: None,
        }
    }
}

/// Separated-packet form at fixed `τ1`, scanned over `τ2`. The dropped term is
/// bounded by `½ e^{-σ+²τ1²/2}`.
pub fn rate_asymptotic_fixed_tau1(
    params: &GaussianParams,
    tau1: f64,
    tau2_grid: UniformGrid,
) -> Result<Interferogram, EngineError> {
    let sp = params.sigma_plus;
    if sp * tau1.abs() < ASYMPTOTIC_MIN {
        return Err(EngineError::AsymptoticPreconditionViolated(format!(
            "sigma_plus * |tau1| = {} < {}",
            sp * tau1.abs(),
            ASYMPTOTIC_MIN
        )));
    }
    let (sm, wp) = (params.sigma_minus, params.pump_frequency);
    let rates = tau2_grid
        .values()
        .into_iter()
        .map(|t2| {
            1.0 - 0.5 * (wp * t2).cos() * gauss(sp, t2) - 0.5 * gauss(sm, t2)
                + 0.25 * (wp * (t2 + tau1)).cos() * gauss(sp, t2 + tau1)
                + 0.25 * (wp * (t2 - tau1)).cos() * gauss(sp, t2 - tau1)
        })
        .collect();
    let mut metadata = params.metadata();
    metadata.delay_step = tau2_grid.step;
    Ok(Interferogram {
        scan_axis: ScanAxis::Tau2AtFixedTau1,
        fixed_delay: Some(tau1),
        delays: tau2_grid,
        delays_2: None,
        rates,
        engine: Engine::Asymptotic,
        metadata,
    })
}

/// Far-HOM-delay form at fixed `τ2`, scanned over `τ1`: only the two side
/// packets at `τ1 = ±τ2` survive.
pub fn rate_asymptotic_fixed_tau2(
    params: &GaussianParams,
    tau2: f64,
    tau1_grid: UniformGrid,
) -> Result<Interferogram, EngineError> {
    let (sp, wp) = (params.sigma_plus, params.pump_frequency);
    let sm = params.sigma_minus;
    if sp * tau2.abs() < ASYMPTOTIC_MIN || sm * tau2.abs() < ASYMPTOTIC_MIN {
        return Err(EngineError::AsymptoticPreconditionViolated(format!(
            "sigma_plus * |tau2| = {}, sigma_minus * |tau2| = {}, both must be >= {}",
            sp * tau2.abs(),
            sm * tau2.abs(),
            ASYMPTOTIC_MIN
        )));
    }
    let rates = tau1_grid
        .values()
        .into_iter()
        .map(|t1| {
            1.0 + 0.25 * (wp * (t1 + tau2)).cos() * gauss(sp, tau2 + t1)
                + 0.25 * (wp * (t1 - tau2)).cos() * gauss(sp, tau2 - t1)
        })
        .collect();
    let mut metadata = params.metadata();
    metadata.delay_step = tau1_grid.step;
    Ok(Interferogram {
        scan_axis: ScanAxis::Tau1AtFixedTau2,
        fixed_delay: Some(tau2),
        delays: tau1_grid,
        delays_2: None,
        rates,
        engine: Engine::Asymptotic,
        metadata,
    })
}

/// Which route produced the numbers of an interferogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Quadrature,
    ClosedForm,
    TimeDomain,
    Asymptotic,
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Quadrature => "quadrature",
            Engine::ClosedForm => "closed_form",
            Engine::TimeDomain => "time_domain",
            Engine::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub kind: JsaKind,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub pump_frequency: f64,
    pub symmetry: Symmetry,
    pub delay_step: f64,
    pub delay_step_2: Option<f64>,
}

/// A delay scan of normalized rates.
///
/// For [`ScanAxis::Grid2D`] `delays` is the `τ1` axis, `delays_2` the `τ2`
/// axis and `rates` is row-major with `τ1` slow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferogram {
    pub scan_axis: ScanAxis,
    pub fixed_delay: Option<f64>,
    pub delays: UniformGrid,
    pub delays_2: Option<UniformGrid>,
    pub rates: Vec<f64>,
    pub engine: Engine,
    pub metadata: ScanMetadata,
}

impl Interferogram {
    /// Delay pairs in the order of `rates`.
    pub fn pairs(&self) -> Vec<DelayPair> {
        pairs_for(self.scan_axis, self.fixed_delay, &self.delays, self.delays_2.as_ref())
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

fn pairs_for(axis: ScanAxis, fixed: Option<f64>, d1: &UniformGrid, d2: Option<&UniformGrid>) -> Vec<DelayPair> {
    let fixed = fixed.unwrap_or(0.0);
    match axis {
        ScanAxis::Tau2AtFixedTau1 => d1.values().into_iter().map(|t| DelayPair { tau1: fixed, tau2: t }).collect(),
        ScanAxis::Tau1AtFixedTau2 => d1.values().into_iter().map(|t| DelayPair { tau1: t, tau2: fixed }).collect(),
        ScanAxis::Grid2D => {
            let d2 = d2.expect("2-D scan has a second axis");
            let mut out = Vec::with_capacity(d1.len * d2.len);
            for t1 in d1.values() {
                for t2 in d2.values() {
                    out.push(DelayPair { tau1: t1, tau2: t2 });
                }
            }
            out
        }
    }
}

/// Largest delay spacing that keeps the carrier band below Nyquist.
pub fn nyquist_limit(pump_frequency: f64, sigma_plus: f64) -> f64 {
    PI / (pump_frequency + 8.0 * sigma_plus) / 2.0
}

/// Resolves `Auto` to a concrete engine for the model.
pub fn resolve_engine(choice: EngineChoice, jsa: &JointSpectralAmplitude) -> Result<Engine, EngineError> {
    let closed_ok = jsa.kind == JsaKind::GaussianProduct && jsa.symmetry == Symmetry::Symmetric;
    match choice {
        EngineChoice::Auto => Ok(if closed_ok { Engine::ClosedForm } else { Engine::Quadrature }),
        EngineChoice::ClosedForm if !closed_ok => Err(EngineError::ClosedFormUnsupported(
            "closed form needs a symmetric Gaussian product model".into(),
        )),
        EngineChoice::ClosedForm => Ok(Engine::ClosedForm),
        EngineChoice::Quadrature => Ok(Engine::Quadrature),
        EngineChoice::TimeDomain => Ok(Engine::TimeDomain),
        EngineChoice::All => Err(EngineError::InvalidDelay(
            "engine `all` must be expanded by the caller into individual scans".into(),
        )),
    }
}

/// Runs the configured scan with one engine. Output depends only on the config.
pub fn scan(config: &ScanConfig) -> Result<Interferogram, EngineError> {
    let jsa = config.model.build()?;
    let engine = resolve_engine(config.engine, &jsa)?;
    scan_with(config, &jsa, engine)
}

/// Runs the configured scan with an explicit engine.
pub fn scan_with(config: &ScanConfig, jsa: &JointSpectralAmplitude, engine: Engine) -> Result<Interferogram, EngineError> {
    let (d1, d2) = config.scan.grids().map_err(|e| EngineError::InvalidDelay(e.to_string()))?;
    let limit = nyquist_limit(jsa.pump_frequency, jsa.sigma_plus);
    for g in std::iter::once(&d1).chain(d2.as_ref()) {
        if g.step > limit * (1.0 + 1e-12) {
            return Err(EngineError::NyquistViolated {
                spacing: g.step,
                limit,
            });
        }
    }
    let pairs = pairs_for(config.scan.axis, config.scan.fixed_delay, &d1, d2.as_ref());
    let rates: Vec<f64> = match engine {
        Engine::ClosedForm => {
            if !(jsa.kind == JsaKind::GaussianProduct && jsa.symmetry == Symmetry::Symmetric) {
                return Err(EngineError::ClosedFormUnsupported(
                    "closed form needs a symmetric Gaussian product model".into(),
                ));
            }
            pairs
                .iter()
                .map(|&p| rate_gaussian_closed(jsa.sigma_plus, jsa.sigma_minus, jsa.pump_frequency, p))
                .collect()
        }
        Engine::Quadrature => pairs
            .iter()
            .map(|&p| rate_quadrature(jsa, p, &config.quadrature).map(|r| r.normalize()))
            .collect::<Result<_, _>>()?,
        Engine::TimeDomain => pairs
            .iter()
            .map(|&p| {
                let grid = TimeGrid::auto(jsa, p)?;
                Ok(time_engine::rate_from_time_domain(jsa, p, &grid)?)
            })
            .collect::<Result<_, EngineError>>()?,
        Engine::Asymptotic => {
            let params = GaussianParams::from_jsa(jsa);
            let fixed = config.scan.fixed_delay.unwrap_or(0.0);
            let ig = match config.scan.axis {
                ScanAxis::Tau2AtFixedTau1 => rate_asymptotic_fixed_tau1(&params, fixed, d1)?,
                ScanAxis::Tau1AtFixedTau2 => rate_asymptotic_fixed_tau2(&params, fixed, d1)?,
                ScanAxis::Grid2D => {
                    return Err(EngineError::AsymptoticPreconditionViolated(
                        "asymptotic forms are one-dimensional scans".into(),
                    ))
                }
            };
            ig.rates
        }
    };
    Ok(Interferogram {
        scan_axis: config.scan.axis,
        fixed_delay: match config.scan.axis {
            ScanAxis::Grid2D => None,
            _ => Some(config.scan.fixed_delay.unwrap_or(0.0)),
        },
        delays: d1,
        delays_2: d2,
        rates,
        engine,
        metadata: ScanMetadata {
            kind: jsa.kind,
            sigma_plus: jsa.sigma_plus,
            sigma_minus: jsa.sigma_minus,
            pump_frequency: jsa.pump_frequency,
            symmetry: jsa.symmetry,
            delay_step: d1.step,
            delay_step_2: d2.map(|g| g.step),
        },
    })
}
