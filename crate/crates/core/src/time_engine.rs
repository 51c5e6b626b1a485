//! Time-domain formulation: the effective two-photon wave function as a
//! signed sum of shifted temporal amplitudes, its joint temporal intensity,
//! and the double time integral that reproduces the frequency-domain rate.
//!
//! Temporal amplitudes use `A(ts, ti) = (1/2π) ∫∫ f(ωs, ωi) e^{-iωs ts - iωi ti} dωs dωi`,
//! so `∫∫ |A|² dts dti = ∫∫ |f|² dωs dωi`. Integration runs in the rotated
//! coordinates `u = ts + ti`, `v = ts - ti` with `dts dti = du dv / 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freq_engine::DelayPair;
use crate::numeric::{dawson, interp_bicubic, pairwise_sum, UniformGrid};
use crate::spectral_model::{JointSpectralAmplitude, JsaKind, ModelError, Symmetry, TabulatedGrid};

/// Half-width of the time window around each packet, in inverse linewidths.
pub const TIME_BOX: f64 = 8.0;
/// Largest grid step in units of the inverse linewidth.
pub const MAX_ENVELOPE_STEP: f64 = 0.5;
/// Default grid step in units of the inverse linewidth.
pub const ENVELOPE_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimeError {
    #[error("TimeGridTooCoarse: {axis} step {step:.4e} exceeds {limit:.4e}")]
    TimeGridTooCoarse { axis: &'static str, step: f64, limit: f64 },
    #[error("TimeGridTooNarrow: {axis} axis [{min}, {max}] misses [{need_min}, {need_max}]")]
    TimeGridTooNarrow {
        axis: &'static str,
        min: f64,
        max: f64,
        need_min: f64,
        need_max: f64,
    },
    #[error("NegativeIntensity: {0}")]
    NegativeIntensity(f64),
    #[error("UnsupportedModel: {0}")]
    UnsupportedModel(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One shifted amplitude of the effective wave function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalAmplitude {
    pub index: u8,
    pub shift_s: f64,
    pub shift_i: f64,
    pub sign: i8,
}

/// The eight amplitudes `A1 … A8` of a symmetric biphoton, in order.
pub fn b1_terms(delays: DelayPair) -> [TemporalAmplitude; 8] {
    let DelayPair { tau1: t1, tau2: t2 } = delays;
    let t12 = t1 + t2;
    let raw = [
        (0.0, 0.0, 1),
        (t1, t1, -1),
        (0.0, t2, 1),
        (t2, 0.0, -1),
        (t1, t12, 1),
        (t12, t1, -1),
        (t12, t12, 1),
        (t2, t2, -1),
    ];
    let mut out = [TemporalAmplitude {
        index: 0,
        shift_s: 0.0,
        shift_i: 0.0,
        sign: 1,
    }; 8];
    for (k, (s, i, sign)) in raw.into_iter().enumerate() {
        out[k] = TemporalAmplitude {
            index: k as u8 + 1,
            shift_s: s,
            shift_i: i,
            sign,
        };
    }
    out
}

/// Factor of the difference-coordinate profile of a Gaussian model.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    Even,
    Odd,
    Mixed { even: Complex64, odd: Complex64 },
}

/// Amplitude `A(ts, ti)` with the carrier `e^{-iωp(ts+ti)/2}` included.
#[derive(Debug, Clone)]
pub enum AmplitudeSource {
    /// Analytic transform of the Gaussian product model, separable in `(u, v)`.
    Gaussian {
        sigma_plus: f64,
        sigma_minus: f64,
        pump: f64,
        profile: ProfileTag,
    },
    Grid(Arc<TemporalGrid>),
}

/// Public mirror of the Gaussian difference profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTag(Profile);

impl AmplitudeSource {
    pub fn new(jsa: &JointSpectralAmplitude) -> Result<Self, TimeError> {
        match jsa.kind {
            JsaKind::GaussianProduct => {
                let profile = match jsa.symmetry {
                    Symmetry::Symmetric => Profile::Even,
                    Symmetry::Antisymmetric => Profile::Odd,
                    Symmetry::Anyonic { phase } => {
                        let x = Complex64::from_polar(1.0, phase);
                        Profile::Mixed {
                            even: (Complex64::new(1.0, 0.0) + x) * 0.5,
                            odd: (x - Complex64::new(1.0, 0.0)) * 0.5,
                        }
                    }
                };
                Ok(AmplitudeSource::Gaussian {
                    sigma_plus: jsa.sigma_plus,
                    sigma_minus: jsa.sigma_minus,
                    pump: jsa.pump_frequency,
                    profile: ProfileTag(profile),
                })
            }
            JsaKind::TabulatedGrid => {
                let table = jsa.grid.as_ref().expect("tabulated model carries a grid");
                Ok(AmplitudeSource::Grid(Arc::new(TemporalGrid::from_table(
                    table,
                    jsa.pump_frequency,
                    4,
                )?)))
            }
        }
    }

    /// Sum-coordinate factor `σ+ e^{-iωp u/2} e^{-σ+²u²/4}`.
    fn u_factor(sigma_plus: f64, pump: f64, u: f64) -> Complex64 {
        Complex64::from_polar(sigma_plus * (-sigma_plus * sigma_plus * u * u / 4.0).exp(), -pump * u / 2.0)
    }

    /// Difference-coordinate factor for the given profile.
    fn v_factor(sigma_minus: f64, profile: Profile, v: f64) -> Complex64 {
        let even = || Complex64::new(sigma_minus * (-sigma_minus * sigma_minus * v * v / 4.0).exp(), 0.0);
        // transform of sign(Ω-) e^{-Ω-²/4σ-²}
        let odd = || Complex64::new(0.0, -2.0 / PI.sqrt() * sigma_minus * dawson(sigma_minus * v / 2.0));
        match profile {
            Profile::Even => even(),
            Profile::Odd => odd(),
            Profile::Mixed { even: a, odd: b } => a * even() + b * odd(),
        }
    }

    pub fn amplitude(&self, ts: f64, ti: f64) -> Complex64 {
        match self {
            AmplitudeSource::Gaussian {
                sigma_plus,
                sigma_minus,
                pump,
                profile,
            } => {
                Self::u_factor(*sigma_plus, *pump, ts + ti) * Self::v_factor(*sigma_minus, profile.0, ts - ti)
            }
            AmplitudeSource::Grid(g) => g.amplitude(ts, ti),
        }
    }
}

/// Temporal amplitude of a tabulated model obtained by a zero-padded 2-D FFT.
/// Values are stored without the pump carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGrid {
    pub ts: UniformGrid,
    pub ti: UniformGrid,
    pub values: Vec<Complex64>,
    pub pump_frequency: f64,
}

impl TemporalGrid {
    pub fn from_table(table: &TabulatedGrid, pump_frequency: f64, pad: usize) -> Result<Self, TimeError> {
        let n_s = table.omega_s.len;
        let n_i = table.omega_i.len;
        let h = table.omega_s.step;
        if (table.omega_i.step - h).abs() > 1e-12 * h {
            return Err(TimeError::UnsupportedModel("FFT path needs equal detuning steps".into()));
        }
        let n = (n_s.max(n_i) * pad.max(1)).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for a in 0..n_s {
            for b in 0..n_i {
                buf[a * n + b] = table.at(a, b);
            }
        }
        for row in buf.chunks_mut(n) {
            fft.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for k in 0..n {
                col[k] = buf[k * n + j];
            }
            fft.process(&mut col);
            for k in 0..n {
                buf[k * n + j] = col[k];
            }
        }
        let dt = 2.0 * PI / (n as f64 * h);
        let half = (n / 2) as i64;
        let axis = UniformGrid {
            start: -(half as f64) * dt,
            step: dt,
            len: n,
        };
        let scale = h * h / (2.0 * PI);
        let (s0, i0) = (table.omega_s.start, table.omega_i.start);
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let tj = axis.at(j);
            let jj = ((j as i64 - half).rem_euclid(n as i64)) as usize;
            for k in 0..n {
                let tk = axis.at(k);
                let kk = ((k as i64 - half).rem_euclid(n as i64)) as usize;
                values[j * n + k] = buf[jj * n + kk] * Complex64::from_polar(scale, -(s0 * tj + i0 * tk));
            }
        }
        Ok(Self {
            ts: axis,
            ti: axis,
            values,
            pump_frequency,
        })
    }

    /// `A(ts, ti)`, zero outside the transform window.
    pub fn amplitude(&self, ts: f64, ti: f64) -> Complex64 {
        match interp_bicubic(&self.ts, &self.ti, &self.values, ts, ti) {
            Some(z) => z * Complex64::from_polar(1.0, -self.pump_frequency * (ts + ti) / 2.0),
            None => Complex64::new(0.0, 0.0),
        }
    }
}

/// Time-domain amplitude `A(ts, ti)` of a model.
pub fn base_amplitude(jsa: &JointSpectralAmplitude, ts: f64, ti: f64) -> Result<Complex64, TimeError> {
    Ok(AmplitudeSource::new(jsa)?.amplitude(ts, ti))
}

/// One term `coef · A(x, y)` of the wave function, where `(x, y)` is
/// `(ts + shift_s, ti + shift_i)` or, for exchanged terms, `(ti + shift_i, ts + shift_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    coef: f64,
    shift_s: f64,
    shift_i: f64,
    exchanged: bool,
}

impl Term {
    /// Shift of the sum coordinate.
    fn u_shift(&self) -> f64 {
        self.shift_s + self.shift_i
    }

    /// Shift `V` and orientation `σ` with the difference argument `σ(v + V)`.
    fn v_shift(&self) -> (f64, f64) {
        let d = self.shift_s - self.shift_i;
        if self.exchanged {
            (d, -1.0)
        } else {
            (d, 1.0)
        }
    }
}

/// Wave-function terms for a model of the given symmetry.
///
/// The frequency amplitude expands into 16 delay monomials multiplying
/// `f(ωs, ωi)` and 16 multiplying `f(ωi, ωs)`; for symmetric and
/// antisymmetric models the two sets merge into eight terms.
fn terms(delays: DelayPair, symmetry: Symmetry) -> Vec<Term> {
    let DelayPair { tau1: t1, tau2: t2 } = delays;
    let d = [t1 + t2, t1, t2, 0.0];
    let c1 = [1.0, 1.0, 1.0, -1.0];
    let c2 = [1.0, -1.0, -1.0, -1.0];
    let c3 = [1.0, 1.0, -1.0, 1.0];
    let c4 = [1.0, -1.0, 1.0, 1.0];
    let mut out = Vec::new();
    match symmetry {
        Symmetry::Symmetric | Symmetry::Antisymmetric => {
            let parity = if symmetry == Symmetry::Symmetric { 1.0 } else { -1.0 };
            for m in 0..4 {
                for n in 0..4 {
                    let coef = 0.5 * (c1[m] * c2[n] + parity * c3[m] * c4[n]);
                    if coef != 0.0 {
                        out.push(Term {
                            coef,
                            shift_s: d[m],
                            shift_i: d[n],
                            exchanged: false,
                        });
                    }
                }
            }
        }
        Symmetry::Anyonic { .. } => {
            for m in 0..4 {
                for n in 0..4 {
                    out.push(Term {
                        coef: 0.5 * c1[m] * c2[n],
                        shift_s: d[m],
                        shift_i: d[n],
                        exchanged: false,
                    });
                }
            }
            for m in 0..4 {
                for n in 0..4 {
                    // f(ωi, ωs) e^{-iωi d_m} e^{-iωs d_n} transforms to A(ti + d_m, ts + d_n)
                    out.push(Term {
                        coef: 0.5 * c4[m] * c3[n],
                        shift_s: d[n],
                        shift_i: d[m],
                        exchanged: true,
                    });
                }
            }
        }
    }
    out
}

/// Effective two-photon wave function `Ψ(ts, ti)`.
pub fn effective_wavefunction(
    jsa: &JointSpectralAmplitude,
    ts: f64,
    ti: f64,
    delays: DelayPair,
) -> Result<Complex64, TimeError> {
    let src = AmplitudeSource::new(jsa)?;
    Ok(wavefunction_with(&src, &terms(delays, jsa.symmetry), ts, ti))
}

fn wavefunction_with(src: &AmplitudeSource, terms: &[Term], ts: f64, ti: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for t in terms {
        let a = if t.exchanged {
            src.amplitude(ti + t.shift_i, ts + t.shift_s)
        } else {
            src.amplitude(ts + t.shift_s, ti + t.shift_i)
        };
        acc += a * t.coef;
    }
    acc
}

/// Quadrature rule along the difference coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VAxis {
    /// Trapezoid on a uniform grid.
    Uniform(UniformGrid),
    /// `v = center + scale·sinh(s)` with `s` uniform, for algebraic tails.
    Sinh { center: f64, scale: f64, s: UniformGrid },
}

impl VAxis {
    pub fn nodes_weights(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            VAxis::Uniform(g) => (g.values(), vec![g.step; g.len]),
            VAxis::Sinh { center, scale, s } => s
                .values()
                .into_iter()
                .map(|x| (center + scale * x.sinh(), scale * x.cosh() * s.step))
                .unzip(),
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match self {
            VAxis::Uniform(g) => (g.start, g.end()),
            VAxis::Sinh { center, scale, s } => (center + scale * s.start.sinh(), center + scale * s.end().sinh()),
        }
    }

    /// Largest node spacing inside `[lo, hi]`.
    fn step_within(&self, lo: f64, hi: f64) -> f64 {
        match self {
            VAxis::Uniform(g) => g.step,
            VAxis::Sinh { center, scale, s } => {
                let far = ((lo - center).abs().max((hi - center).abs())) / scale;
                scale * (far.asinh()).cosh() * s.step
            }
        }
    }
}

/// Integration grid in `(u, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub u: UniformGrid,
    pub v: VAxis,
}

/// Packet centers of the wave-function terms in `(u, v)`.
fn centers(terms: &[Term]) -> ((f64, f64), (f64, f64)) {
    let mut u = (f64::INFINITY, f64::NEG_INFINITY);
    let mut v = (f64::INFINITY, f64::NEG_INFINITY);
    for t in terms {
        let cu = -t.u_shift();
        let cv = -t.v_shift().0;
        u = (u.0.min(cu), u.1.max(cu));
        v = (v.0.min(cv), v.1.max(cv));
    }
    (u, v)
}

fn has_algebraic_tail(jsa: &JointSpectralAmplitude) -> bool {
    jsa.kind == JsaKind::GaussianProduct && jsa.symmetry != Symmetry::Symmetric
}

impl TimeGrid {
    /// Grid covering every packet center by `±8/σ` per coordinate, with the
    /// sum axis resolving the carrier (`Δu ≤ π/(2ωp)`). Models with a sign
    /// jump in `Ω-` decay algebraically in `v` and get a sinh-mapped axis.
    pub fn auto(jsa: &JointSpectralAmplitude, delays: DelayPair) -> Result<Self, TimeError> {
        let ts = terms(delays, jsa.symmetry);
        let ((u_lo, u_hi), (v_lo, v_hi)) = centers(&ts);
        let (sp, sm) = (jsa.sigma_plus, jsa.sigma_minus);
        let du = (PI / (2.0 * jsa.pump_frequency)).min(ENVELOPE_STEP / sp);
        let (a, b) = (u_lo - TIME_BOX / sp, u_hi + TIME_BOX / sp);
        let nu = ((b - a) / du).ceil() as usize + 1;
        let u = UniformGrid::linspace(a, b, nu).expect("finite span");
        let v = if has_algebraic_tail(jsa) {
            let center = 0.5 * (v_lo + v_hi);
            let scale = (0.5 * (v_hi - v_lo)).max(1.0 / sm);
            // near the packets |v - center| <= scale so cosh(s) <= √2
            let ds = ENVELOPE_STEP / (sm * scale * 2f64.sqrt());
            let s_max = (1e13 / (sm * scale)).asinh();
            let n = (2.0 * s_max / ds).ceil() as usize + 1;
            VAxis::Sinh {
                center,
                scale,
                s: UniformGrid::symmetric(s_max, n).expect("finite span"),
            }
        } else {
            let dv = ENVELOPE_STEP / sm;
            let (a, b) = (v_lo - TIME_BOX / sm, v_hi + TIME_BOX / sm);
            let nv = ((b - a) / dv).ceil() as usize + 1;
            VAxis::Uniform(UniformGrid::linspace(a, b, nv).expect("finite span"))
        };
        Ok(Self { u, v })
    }

    fn check(&self, jsa: &JointSpectralAmplitude, terms: &[Term]) -> Result<(), TimeError> {
        let (sp, sm) = (jsa.sigma_plus, jsa.sigma_minus);
        let carrier = PI / (2.0 * jsa.pump_frequency);
        let u_limit = carrier.min(MAX_ENVELOPE_STEP / sp);
        if self.u.step > u_limit * (1.0 + 1e-12) {
            return Err(TimeError::TimeGridTooCoarse {
                axis: "u",
                step: self.u.step,
                limit: u_limit,
            });
        }
        let ((u_lo, u_hi), (v_lo, v_hi)) = centers(terms);
        let need_u = (u_lo - TIME_BOX / sp, u_hi + TIME_BOX / sp);
        let slack = 1e-9 * (1.0 + need_u.0.abs().max(need_u.1.abs()));
        if self.u.start > need_u.0 + slack || self.u.end() < need_u.1 - slack {
            return Err(TimeError::TimeGridTooNarrow {
                axis: "u",
                min: self.u.start,
                max: self.u.end(),
                need_min: need_u.0,
                need_max: need_u.1,
            });
        }
        let need_v = (v_lo - TIME_BOX / sm, v_hi + TIME_BOX / sm);
        let (vmin, vmax) = self.v.bounds();
        let slack = 1e-9 * (1.0 + need_v.0.abs().max(need_v.1.abs()));
        if vmin > need_v.0 + slack || vmax < need_v.1 - slack {
            return Err(TimeError::TimeGridTooNarrow {
                axis: "v",
                min: vmin,
                max: vmax,
                need_min: need_v.0,
                need_max: need_v.1,
            });
        }
        let v_step = self.v.step_within(v_lo, v_hi);
        if v_step > MAX_ENVELOPE_STEP / sm * (1.0 + 1e-12) {
            return Err(TimeError::TimeGridTooCoarse {
                axis: "v",
                step: v_step,
                limit: MAX_ENVELOPE_STEP / sm,
            });
        }
        Ok(())
    }
}

/// Normalization `8 ∫∫|f|²`, equal to `8πσ+σ-` for the Gaussian model.
fn normalization(jsa: &JointSpectralAmplitude) -> f64 {
    match &jsa.grid {
        None => 8.0 * PI * jsa.sigma_plus * jsa.sigma_minus,
        Some(t) => 8.0 * t.norm_squared(),
    }
}

/// Normalized rate `∫∫ |Ψ|² dts dti / (8∫∫|f|²)` on the given grid.
pub fn rate_from_time_domain(jsa: &JointSpectralAmplitude, delays: DelayPair, grid: &TimeGrid) -> Result<f64, TimeError> {
    let terms = terms(delays, jsa.symmetry);
    grid.check(jsa, &terms)?;
    let src = AmplitudeSource::new(jsa)?;
    let (vs, wv) = grid.v.nodes_weights();
    let us = grid.u.values();
    let rows: Vec<Result<f64, TimeError>> = match &src {
        AmplitudeSource::Gaussian {
            sigma_plus,
            sigma_minus,
            pump,
            profile,
        } => {
            // separable per-term tables a_k(u) b_k(v)
            let b_tab: Vec<Vec<Complex64>> = terms
                .iter()
                .map(|t| {
                    let (vshift, orient) = t.v_shift();
                    vs.iter()
                        .map(|&v| AmplitudeSource::v_factor(*sigma_minus, profile.0, orient * (v + vshift)) * t.coef)
                        .collect()
                })
                .collect();
            us.par_iter()
                .map(|&u| {
                    let a: Vec<Complex64> = terms
                        .iter()
                        .map(|t| AmplitudeSource::u_factor(*sigma_plus, *pump, u + t.u_shift()))
                        .collect();
                    let mut vals = Vec::with_capacity(vs.len());
                    for (j, w) in wv.iter().enumerate() {
                        let mut psi = Complex64::new(0.0, 0.0);
                        for (k, ak) in a.iter().enumerate() {
                            psi += ak * b_tab[k][j];
                        }
                        vals.push(w * psi.norm_sqr());
                    }
                    Ok(pairwise_sum(&vals))
                })
                .collect()
        }
        AmplitudeSource::Grid(_) => us
            .par_iter()
            .map(|&u| {
                let mut vals = Vec::with_capacity(vs.len());
                for (&v, w) in vs.iter().zip(&wv) {
                    let psi = wavefunction_with(&src, &terms, 0.5 * (u + v), 0.5 * (u - v));
                    let intensity = psi.norm_sqr();
                    if !(intensity >= 0.0) {
                        return Err(TimeError::NegativeIntensity(intensity));
                    }
                    vals.push(w * intensity);
                }
                Ok(pairwise_sum(&vals))
            })
            .collect(),
    };
    let mut sums = Vec::with_capacity(rows.len());
    for r in rows {
        sums.push(r?);
    }
    let integral = 0.5 * grid.u.step * pairwise_sum(&sums);
    Ok(integral / normalization(jsa))
}

/// Sampled `|Ψ(ts, ti)|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTemporalIntensity {
    pub ts_grid: UniformGrid,
    pub ti_grid: UniformGrid,
    /// Row-major with `ts` slow.
    pub values: Vec<f64>,
}

/// Joint temporal intensity on a `(ts, ti)` grid.
pub fn joint_temporal_intensity(
    jsa: &JointSpectralAmplitude,
    delays: DelayPair,
    ts_grid: UniformGrid,
    ti_grid: UniformGrid,
) -> Result<JointTemporalIntensity, TimeError> {
    let src = AmplitudeSource::new(jsa)?;
    let terms = terms(delays, jsa.symmetry);
    let tis = ti_grid.values();
    let values: Vec<f64> = ts_grid
        .values()
        .par_iter()
        .flat_map_iter(|&ts| {
            tis.iter()
                .map(|&ti| wavefunction_with(&src, &terms, ts, ti).norm_sqr())
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(JointTemporalIntensity {
        ts_grid,
        ti_grid,
        values,
    })
}

/// A named group of cross terms and the rate term it should reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditGroup {
    pub name: String,
    /// Index pairs (1-based) making up the group.
    pub pairs: Vec<(u8, u8)>,
    /// Integral of the group, normalized by the empirical baseline.
    pub value: f64,
    /// Corresponding closed-form term.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTermAudit {
    pub delays: DelayPair,
    /// `∫∫|A_k|²` for `k = 1 … 8`.
    pub moduli: Vec<f64>,
    /// Sum of the moduli integrals.
    pub empirical_normalization: f64,
    /// `8πσ+σ-`.
    pub analytic_normalization: f64,
    /// Each named pair `A_j* A_k + A_j A_k*` with its sign, normalized.
    pub named_pairs: Vec<((u8, u8), f64)>,
    pub groups: Vec<AuditGroup>,
    /// Sum of the 20 remaining cross terms, normalized.
    pub residual: f64,
    /// Total normalized rate rebuilt from the terms.
    pub total: f64,
}

/// Named cross-term groups and the rate terms they reproduce.
pub const AUDIT_GROUPS: [(&str, [(u8, u8); 2]); 4] = [
    ("noon_hom_product", [(3, 6), (4, 5)]),
    ("noon_central", [(1, 8), (2, 7)]),
    ("hom_dip", [(3, 4), (5, 6)]),
    ("noon_side_packets", [(1, 7), (2, 8)]),
];

/// Integrates the 64-term expansion of the symmetric Gaussian JTI term by
/// term: eight moduli, eight named cross-term pairs, and the residual bucket.
pub fn cross_term_audit(jsa: &JointSpectralAmplitude, delays: DelayPair) -> Result<CrossTermAudit, TimeError> {
    if !(jsa.kind == JsaKind::GaussianProduct && jsa.symmetry == Symmetry::Symmetric) {
        return Err(TimeError::UnsupportedModel(
            "the cross-term audit covers the symmetric Gaussian model".into(),
        ));
    }
    let amps = b1_terms(delays);
    let grid = TimeGrid::auto(jsa, delays)?;
    let (sp, sm, wp) = (jsa.sigma_plus, jsa.sigma_minus, jsa.pump_frequency);
    let us = grid.u.values();
    let (vs, wv) = grid.v.nodes_weights();
    let a_tab: Vec<Vec<Complex64>> = amps
        .iter()
        .map(|t| us.iter().map(|&u| AmplitudeSource::u_factor(sp, wp, u + t.shift_s + t.shift_i)).collect())
        .collect();
    let b_tab: Vec<Vec<Complex64>> = amps
        .iter()
        .map(|t| {
            vs.iter()
                .map(|&v| AmplitudeSource::v_factor(sm, Profile::Even, v + t.shift_s - t.shift_i))
                .collect()
        })
        .collect();
    // ∫∫ c_j c_k A_j conj(A_k) dts dti for one pair, separable in (u, v)
    let pair = |j: usize, k: usize| -> f64 {
        let fu: Vec<Complex64> = (0..us.len()).map(|i| a_tab[j][i] * a_tab[k][i].conj()).collect();
        let fv: Vec<Complex64> = (0..vs.len()).map(|i| b_tab[j][i] * b_tab[k][i].conj() * wv[i]).collect();
        let iu = crate::numeric::pairwise_sum_complex(&fu) * grid.u.step;
        let iv = crate::numeric::pairwise_sum_complex(&fv);
        let sign = (amps[j].sign * amps[k].sign) as f64;
        let z = iu * iv * 0.5 * sign;
        if j == k {
            z.re
        } else {
            2.0 * z.re
        }
    };
    let mut jobs: Vec<(usize, usize)> = (0..8).map(|k| (k, k)).collect();
    for j in 0..8 {
        for k in j + 1..8 {
            jobs.push((j, k));
        }
    }
    let values: Vec<f64> = jobs.par_iter().map(|&(j, k)| pair(j, k)).collect();
    let lookup = |j: u8, k: u8| -> f64 {
        let (a, b) = ((j.min(k) - 1) as usize, (j.max(k) - 1) as usize);
        let idx = jobs.iter().position(|&p| p == (a, b)).expect("pair exists");
        values[idx]
    };
    let moduli: Vec<f64> = (0..8).map(|k| values[k]).collect();
    let empirical = pairwise_sum(&moduli);
    let analytic = normalization(jsa);
    let gp = |t: f64| (wp * t).cos() * (-sp * sp * t * t / 2.0).exp();
    let gm = |t: f64| (-sm * sm * t * t / 2.0).exp();
    let DelayPair { tau1: t1, tau2: t2 } = delays;
    let expected = [
        -0.5 * gp(t1) * gm(t2),
        -0.5 * gp(t2),
        -0.5 * gm(t2),
        0.25 * gp(t2 + t1) + 0.25 * gp(t2 - t1),
    ];
    let mut named = Vec::new();
    let mut groups = Vec::new();
    for ((name, pairs), exp) in AUDIT_GROUPS.iter().zip(expected) {
        let mut sum = 0.0;
        for &(j, k) in pairs {
            let v = lookup(j, k) / empirical;
            named.push(((j, k), v));
            sum += v;
        }
        groups.push(AuditGroup {
            name: name.to_string(),
            pairs: pairs.to_vec(),
            value: sum,
            expected: exp,
        });
    }
    let named_set: Vec<(u8, u8)> = AUDIT_GROUPS.iter().flat_map(|g| g.1).collect();
    let mut rest = Vec::new();
    for j in 1..=8u8 {
        for k in j + 1..=8u8 {
            if !named_set.contains(&(j, k)) {
                rest.push(lookup(j, k) / empirical);
            }
        }
    }
    let residual = pairwise_sum(&rest);
    let total = 1.0 + groups.iter().map(|g| g.value).sum::<f64>() + residual;
    Ok(CrossTermAudit {
        delays,
        moduli,
        empirical_normalization: empirical,
        analytic_normalization: analytic,
        named_pairs: named,
        groups,
        residual,
        total,
    })
}
