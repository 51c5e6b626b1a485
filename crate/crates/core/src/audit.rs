//! Cross-checks between the engines on a small delay grid, plus the
//! single-stage HOM and NOON baselines.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::freq_engine::{homi_rate, nooni_rate, rate_gaussian_closed, rate_quadrature, DelayPair, EngineError, QuadratureSpec};
use crate::numeric::UniformGrid;
use crate::spectral_model::{make_gaussian_jsa, JointSpectralAmplitude, JsaKind, Symmetry};
use crate::time_engine::{cross_term_audit, rate_from_time_domain, CrossTermAudit, TimeGrid};

pub const DUAL_DOMAIN_TOL: f64 = 1e-5;
pub const CLOSED_FORM_TOL: f64 = 1e-6;
pub const GROUP_TOL: f64 = 1e-6;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const HOM_DIP_TOL: f64 = 1e-9;
pub const HOM_PEAK_TOL: f64 = 1e-6;
pub const PERIOD_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayComparison {
    pub delays: DelayPair,
    pub quadrature: f64,
    pub quadrature_error_estimate: Option<f64>,
    pub closed_form: Option<f64>,
    pub time_domain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    /// Symmetric HOM rate at zero delay (ideal 0).
    pub hom_symmetric_at_zero: f64,
    /// Antisymmetric HOM rate at zero delay (ideal 2).
    pub hom_antisymmetric_at_zero: f64,
    /// Measured NOON fringe period.
    pub noon_period: f64,
    /// `2π/ωp`.
    pub noon_period_expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub comparisons: Vec<DelayComparison>,
    pub max_dual_domain: f64,
    pub max_closed_vs_quadrature: Option<f64>,
    pub baselines: Baselines,
    /// Empty unless the model is a symmetric Gaussian.
    pub cross_terms: Vec<CrossTermAudit>,
    pub max_group_error: Option<f64>,
    pub max_residual: Option<f64>,
}

/// `points × points` grid of `(τ1, τ2)` on `[-span, span]²`.
pub fn delay_grid(span: f64, points: usize) -> Vec<DelayPair> {
    let axis = UniformGrid::linspace(-span, span, points.max(2)).expect("finite span").values();
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for &t1 in &axis {
        for &t2 in &axis {
            out.push(DelayPair { tau1: t1, tau2: t2 });
        }
    }
    out
}

/// Period of the NOON fringe from the level-1 crossings over a few cycles.
pub fn noon_fringe_period(jsa: &JointSpectralAmplitude, quad: &QuadratureSpec) -> Result<f64, EngineError> {
    let period = 2.0 * PI / jsa.pump_frequency;
    let grid = UniformGrid::linspace(0.0, 4.0 * period, 801).expect("finite span");
    let mut rates = Vec::with_capacity(grid.len);
    for t in grid.values() {
        rates.push(nooni_rate(jsa, t, quad)? - 1.0);
    }
    let mut crossings = Vec::new();
    for k in 0..grid.len - 1 {
        let (a, b) = (rates[k], rates[k + 1]);
        if a == 0.0 || a.signum() != b.signum() {
            crossings.push(grid.at(k) + grid.step * a / (a - b));
        }
    }
    if crossings.len() < 3 {
        return Err(EngineError::InvalidDelay("NOON fringe shows fewer than three crossings".into()));
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Ok(2.0 * span / (crossings.len() - 1) as f64)
}

fn baselines(jsa: &JointSpectralAmplitude, quad: &QuadratureSpec) -> Result<Baselines, EngineError> {
    let sym = make_gaussian_jsa(jsa.sigma_plus, jsa.sigma_minus, jsa.pump_frequency, Symmetry::Symmetric)?;
    let anti = make_gaussian_jsa(jsa.sigma_plus, jsa.sigma_minus, jsa.pump_frequency, Symmetry::Antisymmetric)?;
    Ok(Baselines {
        hom_symmetric_at_zero: homi_rate(&sym, 0.0, quad)?,
        hom_antisymmetric_at_zero: homi_rate(&anti, 0.0, quad)?,
        noon_period: noon_fringe_period(jsa, quad)?,
        noon_period_expected: 2.0 * PI / jsa.pump_frequency,
    })
}

/// Runs every engine at each delay pair and the baseline checks.
pub fn run_audit(jsa: &JointSpectralAmplitude, delays: &[DelayPair], quad: &QuadratureSpec) -> Result<AuditReport, EngineError> {
    let closed = jsa.kind == JsaKind::GaussianProduct && jsa.symmetry == Symmetry::Symmetric;
    let mut comparisons = Vec::with_capacity(delays.len());
    let mut cross_terms = Vec::new();
    for &d in delays {
        let q = rate_quadrature(jsa, d, quad)?;
        let grid = TimeGrid::auto(jsa, d)?;
        let t = rate_from_time_domain(jsa, d, &grid)?;
        comparisons.push(DelayComparison {
            delays: d,
            quadrature: q.normalize(),
            quadrature_error_estimate: q.error_estimate.map(|e| e / q.baseline),
            closed_form: closed.then(|| rate_gaussian_closed(jsa.sigma_plus, jsa.sigma_minus, jsa.pump_frequency, d)),
            time_domain: t,
        });
        if closed {
            cross_terms.push(cross_term_audit(jsa, d)?);
        }
    }
    let max_dual_domain = comparisons
        .iter()
        .map(|c| (c.time_domain - c.quadrature).abs())
        .fold(0.0, f64::max);
    let max_closed_vs_quadrature = closed.then(|| {
        comparisons
            .iter()
            .map(|c| (c.closed_form.unwrap_or(f64::NAN) - c.quadrature).abs())
            .fold(0.0, f64::max)
    });
    let max_group_error = (!cross_terms.is_empty()).then(|| {
        cross_terms
            .iter()
            .flat_map(|a| a.groups.iter().map(|g| (g.value - g.expected).abs()))
            .fold(0.0, f64::max)
    });
    let max_residual = (!cross_terms.is_empty()).then(|| cross_terms.iter().map(|a| a.residual.abs()).fold(0.0, f64::max));
    Ok(AuditReport {
        comparisons,
        max_dual_domain,
        max_closed_vs_quadrature,
        baselines: baselines(jsa, quad)?,
        cross_terms,
        max_group_error,
        max_residual,
    })
}

/// One failed comparison, named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
}

/// Comparisons that exceed their tolerances.
pub fn failures(report: &AuditReport) -> Vec<AuditFailure> {
    let mut out = Vec::new();
    let mut check = |name: &str, value: f64, tolerance: f64| {
        if !(value <= tolerance) {
            out.push(AuditFailure {
                check: name.to_string(),
                value,
                tolerance,
            });
        }
    };
    check("time_domain_vs_quadrature", report.max_dual_domain, DUAL_DOMAIN_TOL);
    if let Some(v) = report.max_closed_vs_quadrature {
        check("closed_form_vs_quadrature", v, CLOSED_FORM_TOL);
    }
    if let Some(v) = report.max_group_error {
        check("cross_term_groups", v, GROUP_TOL);
    }
    if let Some(v) = report.max_residual {
        check("cross_term_residual", v, RESIDUAL_TOL);
    }
    let b = &report.baselines;
    check("hom_symmetric_dip", b.hom_symmetric_at_zero.abs(), HOM_DIP_TOL);
    check("hom_antisymmetric_peak", (b.hom_antisymmetric_at_zero - 2.0).abs(), HOM_PEAK_TOL);
    check(
        "noon_fringe_period",
        (b.noon_period / b.noon_period_expected - 1.0).abs(),
        PERIOD_REL_TOL,
    );
    out
}
