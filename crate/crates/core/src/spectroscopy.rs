//! Inverse problem: envelopes, collective-coordinate spectra and the JSI from
//! a single `τ2` interferogram taken at fixed `τ1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScanAxis;
use crate::freq_engine::{nyquist_limit, Interferogram};
use crate::numeric::{fit_log_parabola, fourier_at, half_width_at, interp_linear, tukey, GaussianFit, UniformGrid};
use crate::spectral_model::{Coordinate, ModelError, SpectralDensity};

/// Taper fraction applied before every transform.
pub const TAPER_ALPHA: f64 = 0.25;
/// Fraction of the peak kept by the log-parabola fits.
pub const FIT_FLOOR: f64 = 0.4;
/// Smallest accepted `σ+τ1` (with 2% slack for the estimate itself).
pub const MIN_SEPARATION: f64 = 5.0;
const SEPARATION_SLACK: f64 = 0.98;
/// Largest envelope minimum between packets, relative to the side peak.
const VALLEY_DEPTH: f64 = 0.5;
/// Samples of each recovered density.
pub const DENSITY_POINTS: usize = 1025;
/// Half-span of the recovered densities in rough linewidths.
pub const DENSITY_SPAN: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectroscopyError {
    #[error("CarrierNotResolved: {0}")]
    CarrierNotResolved(String),
    #[error("PacketsOverlap: {0}")]
    PacketsOverlap(String),
    #[error("AntisymmetricInput: central value {center:.4} lies above the baseline {baseline:.4}")]
    AntisymmetricInput { center: f64, baseline: f64 },
    #[error("WrongScanAxis: the inverse pipeline needs a tau2 scan at fixed tau1, got {0:?}")]
    WrongScanAxis(ScanAxis),
    #[error("IncompatibleGrids: {0}")]
    IncompatibleGrids(String),
    #[error("FitFailed: {0}")]
    FitFailed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Upper and lower envelopes of a `τ2` interferogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePair {
    pub delays: UniformGrid,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

/// Demodulated interferogram.
#[derive(Debug, Clone)]
struct Demodulated {
    grid: UniformGrid,
    /// Flat level far from every packet.
    reference: f64,
    /// Low-pass part, absolute.
    baseline: Vec<f64>,
    /// Magnitude of the carrier band analytic signal.
    oscillation: Vec<f64>,
    noise_floor: f64,
}

fn demodulate(ig: &Interferogram) -> Result<Demodulated, SpectroscopyError> {
    if ig.scan_axis != ScanAxis::Tau2AtFixedTau1 {
        return Err(SpectroscopyError::WrongScanAxis(ig.scan_axis));
    }
    let grid = ig.delays;
    let n = grid.len;
    let wp = ig.metadata.pump_frequency;
    let dt = grid.step;
    if n < 16 || ig.rates.len() != n {
        return Err(SpectroscopyError::IncompatibleGrids(format!(
            "{} rates on {} delays",
            ig.rates.len(),
            n
        )));
    }
    let limit = nyquist_limit(wp, ig.metadata.sigma_plus);
    if PI / dt < 1.25 * wp || dt > limit * (1.0 + 1e-9) {
        return Err(SpectroscopyError::CarrierNotResolved(format!(
            "delay step {dt:.4e} does not resolve the carrier at {wp} (limit {limit:.4e})"
        )));
    }
    let edge = (n / 100).max(1);
    let reference = (ig.rates[..edge].iter().sum::<f64>() + ig.rates[n - edge..].iter().sum::<f64>()) / (2 * edge) as f64;

    let mut spectrum: Vec<Complex64> = ig.rates.iter().map(|&r| Complex64::new(r - reference, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut spectrum);
    let omega = |k: usize| {
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        2.0 * PI * signed / (n as f64 * dt)
    };
    let mut low = vec![Complex64::new(0.0, 0.0); n];
    let mut band = vec![Complex64::new(0.0, 0.0); n];
    let mut band_peak = (0.0, f64::NAN);
    for k in 0..n {
        let w = omega(k);
        if w.abs() < wp / 4.0 {
            low[k] = spectrum[k];
        } else if w > wp / 4.0 && w < 1.75 * wp {
            band[k] = spectrum[k] * 2.0;
            if spectrum[k].norm() > band_peak.0 {
                band_peak = (spectrum[k].norm(), w);
            }
        }
    }
    if !(band_peak.1 >= 0.75 * wp && band_peak.1 <= 1.25 * wp) {
        return Err(SpectroscopyError::CarrierNotResolved(format!(
            "carrier band peaks at {:.4} instead of near {wp}",
            band_peak.1
        )));
    }
    let inverse = planner.plan_fft_inverse(n);
    inverse.process(&mut low);
    inverse.process(&mut band);
    let scale = 1.0 / n as f64;
    let baseline: Vec<f64> = low.iter().map(|z| reference + z.re * scale).collect();
    let oscillation: Vec<f64> = band.iter().map(|z| z.norm() * scale).collect();
    let mut sorted = oscillation.clone();
    sorted.sort_by(f64::total_cmp);
    let noise_floor = 3.0 * sorted[n / 10] + 1e-12;
    Ok(Demodulated {
        grid,
        reference,
        baseline,
        oscillation,
        noise_floor,
    })
}

/// Envelopes by carrier demodulation at the known pump frequency.
pub fn extract_envelopes(ig: &Interferogram) -> Result<EnvelopePair, SpectroscopyError> {
    let d = demodulate(ig)?;
    Ok(envelopes_of(&d))
}

fn envelopes_of(d: &Demodulated) -> EnvelopePair {
    let mut upper = Vec::with_capacity(d.grid.len);
    let mut lower = Vec::with_capacity(d.grid.len);
    for (&b, &e) in d.baseline.iter().zip(&d.oscillation) {
        if e < d.noise_floor {
            upper.push(b);
            lower.push(b);
        } else {
            upper.push(b + e);
            lower.push(b - e);
        }
    }
    EnvelopePair {
        delays: d.grid,
        upper,
        lower,
    }
}

/// Located packets of the oscillation envelope.
#[derive(Debug, Clone, Copy)]
struct Packets {
    center_index: usize,
    /// Index range of each side packet search region.
    left: (usize, usize),
    right: (usize, usize),
    tau1_hat: f64,
}

/// Centroid of `ys` over the contiguous region around its maximum within
/// `[lo, hi)` where it stays above `FIT_FLOOR` of that maximum.
fn centroid(grid: &UniformGrid, ys: &[f64], lo: usize, hi: usize) -> Option<(f64, usize)> {
    let (imax, &peak) = ys[lo..hi].iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let imax = imax + lo;
    if !(peak > 0.0) {
        return None;
    }
    let mut a = imax;
    while a > lo && ys[a - 1] >= FIT_FLOOR * peak {
        a -= 1;
    }
    let mut b = imax;
    while b + 1 < hi && ys[b + 1] >= FIT_FLOOR * peak {
        b += 1;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (k, &y) in ys.iter().enumerate().take(b + 1).skip(a) {
        num += grid.at(k) * y;
        den += y;
    }
    Some((num / den, imax))
}

fn locate_packets(d: &Demodulated) -> Result<Packets, SpectroscopyError> {
    let g = &d.grid;
    let e = &d.oscillation;
    let n = g.len;
    if !(g.start < 0.0 && g.end() > 0.0) {
        return Err(SpectroscopyError::PacketsOverlap("scan does not straddle tau2 = 0".into()));
    }
    let c = g.position(0.0).round() as usize;
    let e0 = e[c];
    // valley between the central packet and each side packet
    let valley = 0.2 * e0;
    let mut r = c;
    while r + 1 < n && e[r] >= valley {
        r += 1;
    }
    let mut l = c;
    while l > 0 && e[l] >= valley {
        l -= 1;
    }
    if r + 1 >= n || l == 0 {
        return Err(SpectroscopyError::PacketsOverlap(
            "no valley between the central and side packets".into(),
        ));
    }
    let (cp, ip) = centroid(g, e, r, n).ok_or_else(|| SpectroscopyError::PacketsOverlap("no right side packet".into()))?;
    let (cm, im) = centroid(g, e, 0, l + 1).ok_or_else(|| SpectroscopyError::PacketsOverlap("no left side packet".into()))?;
    for (a, b, peak) in [(c, ip, e[ip]), (im, c, e[im])] {
        let floor = e[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
        if floor > VALLEY_DEPTH * peak {
            return Err(SpectroscopyError::PacketsOverlap(format!(
                "valley {floor:.3e} is not below {VALLEY_DEPTH} of the side peak {peak:.3e}"
            )));
        }
    }
    Ok(Packets {
        center_index: c,
        left: (0, l + 1),
        right: (r, n),
        tau1_hat: 0.5 * (cp - cm),
    })
}

fn reject_antisymmetric(d: &Demodulated, p: &Packets) -> Result<(), SpectroscopyError> {
    let center = d.baseline[p.center_index];
    if center > d.reference {
        return Err(SpectroscopyError::AntisymmetricInput {
            center,
            baseline: d.reference,
        });
    }
    Ok(())
}

/// Envelope of one side packet rebuilt from the outer flanks of both side
/// packets, so the central structure never enters the window.
fn stitched_side_envelope(d: &Demodulated, tau1_hat: f64) -> Option<(UniformGrid, Vec<f64>)> {
    let g = &d.grid;
    let lo = g.start + tau1_hat;
    let hi = g.end() - tau1_hat;
    let half = lo.abs().min(hi.abs());
    let m = (half / g.step).floor() as usize;
    if m < 8 {
        return None;
    }
    let s = UniformGrid {
        start: -(m as f64) * g.step,
        step: g.step,
        len: 2 * m + 1,
    };
    let vals = s
        .values()
        .into_iter()
        .map(|x| {
            let t = if x >= 0.0 { tau1_hat + x } else { -tau1_hat + x };
            interp_linear(g, &d.oscillation, t).unwrap_or(0.0)
        })
        .collect();
    Some((s, vals))
}

/// Tapered direct transform magnitude on `±DENSITY_SPAN·width`, unit peak.
fn density_from(coordinate: Coordinate, grid: &UniformGrid, samples: &[f64], width: f64) -> Result<SpectralDensity, SpectroscopyError> {
    let w = tukey(samples.len(), TAPER_ALPHA);
    let tapered: Vec<f64> = samples.iter().zip(&w).map(|(x, t)| x * t).collect();
    let omegas = UniformGrid::symmetric(DENSITY_SPAN * width, DENSITY_POINTS)
        .ok_or_else(|| SpectroscopyError::FitFailed("degenerate density grid".into()))?;
    let values: Vec<f64> = fourier_at(grid, &tapered, &omegas.values()).iter().map(|z| z.norm()).collect();
    Ok(SpectralDensity::new(coordinate, omegas, values)?.unit_peak())
}

fn fit(density: &SpectralDensity) -> Result<GaussianFit, SpectroscopyError> {
    fit_log_parabola(&density.detunings.values(), &density.values, FIT_FLOOR)
        .ok_or_else(|| SpectroscopyError::FitFailed(format!("{:?} density has no Gaussian core", density.coordinate)))
}

/// Direct time-domain measurements of the interferogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScales {
    /// `e^{-1/2}` half-width of a side-packet envelope, `≈ 1/σ+`.
    pub envelope_width: f64,
    /// `e^{-1/2}` half-width of the central dip, `≈ 1/σ-`.
    pub dip_width: f64,
    /// Half the distance between the side packets, `≈ τ1`.
    pub half_separation: f64,
}

impl TimeScales {
    pub fn packet_separation(&self) -> f64 {
        2.0 * self.half_separation
    }
}

/// Oscillation visibilities relative to the flat level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibilities {
    pub central: f64,
    pub side: f64,
}

struct Analysis {
    demod: Demodulated,
    packets: Packets,
    /// `reference - baseline`, the isolated dip.
    dip: Vec<f64>,
}

fn analyse(ig: &Interferogram) -> Result<Analysis, SpectroscopyError> {
    let demod = demodulate(ig)?;
    let packets = locate_packets(&demod)?;
    reject_antisymmetric(&demod, &packets)?;
    let dip = demod.baseline.iter().map(|b| demod.reference - b).collect();
    Ok(Analysis { demod, packets, dip })
}

impl Analysis {
    fn time_scales(&self) -> Result<TimeScales, SpectroscopyError> {
        let g = &self.demod.grid;
        let (a, b) = self.packets.right;
        let side_grid = UniformGrid {
            start: g.at(a),
            step: g.step,
            len: b - a,
        };
        let level = (-0.5f64).exp();
        let envelope_width = half_width_at(&side_grid, &self.demod.oscillation[a..b], level)
            .ok_or_else(|| SpectroscopyError::PacketsOverlap("side packet is truncated by the scan".into()))?;
        let dip_width = half_width_at(g, &self.dip, level)
            .ok_or_else(|| SpectroscopyError::FitFailed("central dip is truncated by the scan".into()))?;
        Ok(TimeScales {
            envelope_width,
            dip_width,
            half_separation: self.packets.tau1_hat,
        })
    }

    fn visibilities(&self) -> Visibilities {
        let e = &self.demod.oscillation;
        let side = |(a, b): (usize, usize)| e[a..b].iter().cloned().fold(0.0, f64::max);
        Visibilities {
            central: e[self.packets.center_index] / self.demod.reference,
            side: 0.5 * (side(self.packets.left) + side(self.packets.right)) / self.demod.reference,
        }
    }

    fn spectra(&self, scales: &TimeScales) -> Result<(SpectralDensity, SpectralDensity), SpectroscopyError> {
        let (s, side) = stitched_side_envelope(&self.demod, self.packets.tau1_hat)
            .ok_or_else(|| SpectroscopyError::PacketsOverlap("scan too short around the side packets".into()))?;
        let f_plus = density_from(Coordinate::Sum, &s, &side, 1.0 / scales.envelope_width)?;
        let f_minus = density_from(Coordinate::Difference, &self.demod.grid, &self.dip, 1.0 / scales.dip_width)?;
        Ok((f_plus, f_minus))
    }
}

/// Recovers `|f(Ω+)|²` from the side-packet envelope and `|f(Ω-)|²` from
/// the central dip, both at unit peak.
pub fn recover_spectra(ig: &Interferogram) -> Result<(SpectralDensity, SpectralDensity), SpectroscopyError> {
    Ok(reconstruct(ig)?.densities())
}

/// Envelope width, dip width and half-separation measured in the time domain.
pub fn estimate_time_scales(ig: &Interferogram) -> Result<TimeScales, SpectroscopyError> {
    let a = analyse(ig)?;
    let s = a.time_scales()?;
    if s.half_separation / s.envelope_width < MIN_SEPARATION * SEPARATION_SLACK {
        return Err(SpectroscopyError::PacketsOverlap(format!(
            "side packets at {:.3} with width {:.3}",
            s.half_separation, s.envelope_width
        )));
    }
    Ok(s)
}

/// Visibilities of the central and side packets.
pub fn visibilities(ig: &Interferogram) -> Result<Visibilities, SpectroscopyError> {
    Ok(analyse(ig)?.visibilities())
}

/// JSI sampled on the collective axes, row-major with `Ω+` slow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsiGrid {
    pub plus: UniformGrid,
    pub minus: UniformGrid,
    pub values: Vec<f64>,
}

impl JsiGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.minus.len + j]
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// JSI on signal/idler detuning axes, row-major with `Ωs` slow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalIdlerJsi {
    pub omega_s: UniformGrid,
    pub omega_i: UniformGrid,
    pub values: Vec<f64>,
}

/// Outer product `F+(Ω+) F-(Ω-)`.
pub fn reconstruct_jsi(f_plus: &SpectralDensity, f_minus: &SpectralDensity) -> Result<JsiGrid, SpectroscopyError> {
    if f_plus.coordinate != Coordinate::Sum || f_minus.coordinate != Coordinate::Difference {
        return Err(SpectroscopyError::IncompatibleGrids(
            "expected a sum density and a difference density".into(),
        ));
    }
    if f_plus.values.len() != f_plus.detunings.len || f_minus.values.len() != f_minus.detunings.len {
        return Err(SpectroscopyError::IncompatibleGrids("density length does not match its grid".into()));
    }
    let mut values = Vec::with_capacity(f_plus.values.len() * f_minus.values.len());
    for p in &f_plus.values {
        for m in &f_minus.values {
            values.push(p * m);
        }
    }
    Ok(JsiGrid {
        plus: f_plus.detunings,
        minus: f_minus.detunings,
        values,
    })
}

/// Resamples the product JSI onto `(Ωs, Ωi)` with `Ω± = Ωs ± Ωi`; zero
/// outside the recovered ranges.
pub fn jsi_signal_idler(
    f_plus: &SpectralDensity,
    f_minus: &SpectralDensity,
    omega_s: UniformGrid,
    omega_i: UniformGrid,
) -> Result<SignalIdlerJsi, SpectroscopyError> {
    reconstruct_jsi(f_plus, f_minus)?;
    let mut values = Vec::with_capacity(omega_s.len * omega_i.len);
    for s in omega_s.values() {
        for i in omega_i.values() {
            let p = interp_linear(&f_plus.detunings, &f_plus.values, s + i).unwrap_or(0.0);
            let m = interp_linear(&f_minus.detunings, &f_minus.values, s - i).unwrap_or(0.0);
            values.push(p * m);
        }
    }
    Ok(SignalIdlerJsi {
        omega_s,
        omega_i,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AntiCorrelated,
    Correlated,
    Uncorrelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationClass {
    pub verdict: Verdict,
    pub ratio_hat: f64,
}

/// Below this `σ+/σ-` the source counts as anti-correlated.
pub const ANTI_CORRELATED_BELOW: f64 = 0.5;
/// Above this `σ+/σ-` the source counts as correlated.
pub const CORRELATED_ABOVE: f64 = 2.0;

pub fn classify_ratio(ratio_hat: f64) -> CorrelationClass {
    let verdict = if ratio_hat < ANTI_CORRELATED_BELOW {
        Verdict::AntiCorrelated
    } else if ratio_hat > CORRELATED_ABOVE {
        Verdict::Correlated
    } else {
        Verdict::Uncorrelated
    };
    CorrelationClass { verdict, ratio_hat }
}

pub fn classify_correlation(result: &ReconstructionResult) -> CorrelationClass {
    classify_ratio(result.sigma_plus_hat / result.sigma_minus_hat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub sigma: f64,
    pub center: f64,
    pub log_residual: f64,
    pub points: usize,
}

impl From<GaussianFit> for FitSummary {
    fn from(f: GaussianFit) -> Self {
        Self {
            sigma: f.sigma,
            center: f.center,
            log_residual: f.residual,
            points: f.points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub f_plus: SpectralDensity,
    pub f_minus: SpectralDensity,
    pub jsi: JsiGrid,
    pub sigma_plus_hat: f64,
    pub sigma_minus_hat: f64,
    pub tau1_hat: f64,
    /// `(1/σ+_hat, 1/σ-_hat, τ1_hat)`.
    pub time_scales: TimeScales,
    /// Widths read off the envelopes directly.
    pub measured_time_scales: TimeScales,
    pub visibilities: Visibilities,
    pub fit_plus: FitSummary,
    pub fit_minus: FitSummary,
    pub envelopes: EnvelopePair,
}

impl ReconstructionResult {
    pub fn densities(self) -> (SpectralDensity, SpectralDensity) {
        (self.f_plus, self.f_minus)
    }

    pub fn classification(&self) -> CorrelationClass {
        classify_correlation(self)
    }
}

/// Full inverse pipeline on one interferogram.
pub fn reconstruct(ig: &Interferogram) -> Result<ReconstructionResult, SpectroscopyError> {
    let a = analyse(ig)?;
    let measured = a.time_scales()?;
    let (f_plus, f_minus) = a.spectra(&measured)?;
    let fp = fit(&f_plus)?;
    let fm = fit(&f_minus)?;
    let tau1_hat = a.packets.tau1_hat;
    let separation = (fp.sigma * tau1_hat).min(tau1_hat / measured.envelope_width);
    if separation < MIN_SEPARATION * SEPARATION_SLACK {
        return Err(SpectroscopyError::PacketsOverlap(format!(
            "sigma_plus_hat * tau1_hat = {separation:.3} is below {MIN_SEPARATION}"
        )));
    }
    let jsi = reconstruct_jsi(&f_plus, &f_minus)?;
    Ok(ReconstructionResult {
        jsi,
        sigma_plus_hat: fp.sigma,
        sigma_minus_hat: fm.sigma,
        tau1_hat,
        time_scales: TimeScales {
            envelope_width: 1.0 / fp.sigma,
            dip_width: 1.0 / fm.sigma,
            half_separation: tau1_hat,
        },
        measured_time_scales: measured,
        visibilities: a.visibilities(),
        fit_plus: fp.into(),
        fit_minus: fm.into(),
        envelopes: envelopes_of(&a.demod),
        f_plus,
        f_minus,
    })
}
