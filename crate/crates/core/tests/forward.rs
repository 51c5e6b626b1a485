use std::f64::consts::PI;

use biphoton_core::freq_engine::{
    baseline_density, coincidence_density, homi_rate, nooni_rate, rate_asymptotic_fixed_tau1, rate_asymptotic_fixed_tau2,
    rate_factorized, rate_gaussian_closed, rate_quadrature, DelayPair, GaussianCorrelation, GaussianParams,
    QuadratureSpec,
};
use biphoton_core::numeric::UniformGrid;
use biphoton_core::spectral_model::{
    correlation_function, make_gaussian_jsa, spectral_density, Coordinate, JointSpectralAmplitude, Symmetry,
};
use proptest::prelude::*;

const WP: f64 = 200.0;

fn gp(sp: f64, t: f64) -> f64 {
    (WP * t).cos() * (-sp * sp * t * t / 2.0).exp()
}

fn gm(sm: f64, t: f64) -> f64 {
    (-sm * sm * t * t / 2.0).exp()
}

/// Symmetric Gaussian rate written out term by term.
fn oracle_symmetric(sp: f64, sm: f64, t1: f64, t2: f64) -> f64 {
    1.0 - 0.5 * gp(sp, t1) * gm(sm, t2) - 0.5 * gp(sp, t2) - 0.5 * gm(sm, t2)
        + 0.25 * gp(sp, t2 + t1)
        + 0.25 * gp(sp, t2 - t1)
}

/// Antisymmetric counterpart `sign(Ω-)·g`, derived independently by
/// integrating the density with the sign flip on the exchange terms.
fn oracle_antisymmetric(sp: f64, sm: f64, t1: f64, t2: f64) -> f64 {
    1.0 + 0.5 * gp(sp, t2) + 0.5 * gm(sm, t2) + 0.25 * gm(sm, t1 - t2) + 0.25 * gm(sm, t1 + t2)
        - 0.5 * gp(sp, t2) * gm(sm, t1)
}

fn gaussian(sp: f64, sm: f64, sym: Symmetry) -> JointSpectralAmplitude {
    make_gaussian_jsa(sp, sm, WP, sym).unwrap()
}

fn quad(j: &JointSpectralAmplitude, t1: f64, t2: f64) -> f64 {
    rate_quadrature(j, DelayPair::new(t1, t2).unwrap(), &QuadratureSpec::default())
        .unwrap()
        .normalize()
}

#[test]
fn fig2_presets_quadrature_matches_closed_form() {
    for (sp, sm) in [(1.0, 10.0), (1.0, 0.1), (1.0, 1.0)] {
        let j = gaussian(sp, sm, Symmetry::Symmetric);
        for &(t1, t2) in &[(5.0, 0.0), (5.0, 5.0), (5.0, -4.9), (5.0, 0.3), (0.0, 1.0), (-3.7, 2.2)] {
            let q = quad(&j, t1, t2);
            let c = oracle_symmetric(sp, sm, t1, t2);
            assert!((q - c).abs() < 1e-6, "({sp},{sm}) ({t1},{t2}): {q} vs {c}");
            assert!((rate_gaussian_closed(sp, sm, WP, DelayPair::new(t1, t2).unwrap()) - c).abs() < 1e-14);
        }
    }
}

#[test]
fn zero_line() {
    let j = gaussian(1.0, 1.0, Symmetry::Symmetric);
    for k in 0..50 {
        let t1 = -8.0 + 16.0 * k as f64 / 49.0;
        let d = DelayPair::new(t1, 0.0).unwrap();
        assert!(rate_gaussian_closed(1.0, 1.0, WP, d).abs() <= 1e-9);
        assert!(quad(&j, t1, 0.0).abs() <= 1e-8, "tau1 {t1}");
    }
}

#[test]
fn hom_reduction_at_zero_noon_delay() {
    let sm = 1.7;
    let j = gaussian(1.0, sm, Symmetry::Symmetric);
    for k in 0..41 {
        let t2 = (-5.0 + 10.0 * k as f64 / 40.0) / sm;
        let hom = 1.0 - gm(sm, t2);
        let c = rate_gaussian_closed(1.0, sm, WP, DelayPair::new(0.0, t2).unwrap());
        assert!((c - hom).abs() <= 1e-8);
        assert!((quad(&j, 0.0, t2) - hom).abs() <= 1e-8, "tau2 {t2}");
    }
}

#[test]
fn antisymmetric_quadrature_matches_derived_form() {
    for (sp, sm) in [(1.0, 1.0), (1.0, 2.0), (0.5, 1.0), (1.0, 10.0)] {
        let j = gaussian(sp, sm, Symmetry::Antisymmetric);
        for &(t1, t2) in &[(0.7, 0.3), (0.2, -0.5), (1.3, 0.4), (5.0, 0.0), (5.0, 5.0)] {
            let q = quad(&j, t1, t2);
            let c = oracle_antisymmetric(sp, sm, t1, t2);
            assert!((q - c).abs() < 1e-8, "({sp},{sm}) ({t1},{t2}): {q} vs {c}");
        }
    }
}

#[test]
fn antisymmetric_is_not_a_pointwise_mirror() {
    // the flipped interferogram keeps the dip-side packets without carrier
    let (sp, sm, t1) = (1.0, 10.0, 5.0);
    let t2 = 5.0;
    let s = oracle_symmetric(sp, sm, t1, t2);
    let a = oracle_antisymmetric(sp, sm, t1, t2);
    assert!((s + a - 2.0).abs() > 0.1);
}

#[test]
fn single_stage_baselines() {
    let sym = gaussian(1.0, 1.0, Symmetry::Symmetric);
    let anti = gaussian(1.0, 1.0, Symmetry::Antisymmetric);
    let q = QuadratureSpec::default();
    assert!(homi_rate(&sym, 0.0, &q).unwrap().abs() < 1e-9);
    assert!((homi_rate(&anti, 0.0, &q).unwrap() - 2.0).abs() < 1e-6);
    for &t in &[0.3, -0.8, 1.5] {
        assert!((homi_rate(&sym, t, &q).unwrap() - (1.0 - gm(1.0, t))).abs() < 1e-9);
        assert!((homi_rate(&anti, t, &q).unwrap() - (1.0 + gm(1.0, t))).abs() < 1e-9);
        assert!((nooni_rate(&sym, t, &q).unwrap() - (1.0 + gp(1.0, t))).abs() < 1e-9);
        assert!((nooni_rate(&anti, t, &q).unwrap() - (1.0 + gm(1.0, t))).abs() < 1e-9);
    }
    // fringe period from two crossings of level 1 a full cycle apart
    let cross = |k: f64| (k + 0.5) * PI / WP;
    let r1 = nooni_rate(&sym, cross(3.0), &q).unwrap();
    let r2 = nooni_rate(&sym, cross(5.0), &q).unwrap();
    assert!((r1 - 1.0).abs() < 1e-9 && (r2 - 1.0).abs() < 1e-9);
}

#[test]
fn asymptotic_forms_stay_within_bounds() {
    let p = GaussianParams {
        sigma_plus: 1.0,
        sigma_minus: 10.0,
        pump_frequency: WP,
    };
    let grid = UniformGrid::linspace(-10.0, 10.0, 2801).unwrap();
    let a = rate_asymptotic_fixed_tau1(&p, 5.0, grid).unwrap();
    let bound = 0.5 * (-12.5f64).exp();
    for (t2, r) in grid.values().iter().zip(&a.rates) {
        assert!((r - oracle_symmetric(1.0, 10.0, 5.0, *t2)).abs() <= bound);
    }
    let b = rate_asymptotic_fixed_tau2(&p, 5.0, grid).unwrap();
    let bound = (-12.5f64).exp();
    for (t1, r) in grid.values().iter().zip(&b.rates) {
        assert!((r - oracle_symmetric(1.0, 10.0, *t1, 5.0)).abs() <= bound);
    }
}

#[test]
fn tabulated_gaussian_agrees_with_analytic_model() {
    let g = UniformGrid::symmetric(7.0, 281).unwrap();
    let mut rows = Vec::new();
    for a in g.values() {
        for b in g.values() {
            let v = (-(a + b).powi(2) / 4.0 - (a - b).powi(2) / (4.0 * 0.8 * 0.8)).exp();
            rows.push([a, b, v, 0.0]);
        }
    }
    let j = JointSpectralAmplitude::from_rows(&rows, WP, Symmetry::Symmetric).unwrap();
    for &(t1, t2) in &[(0.0, 0.0), (0.5, 0.2), (1.0, -0.6)] {
        let q = quad(&j, t1, t2);
        assert!((q - oracle_symmetric(1.0, 0.8, t1, t2)).abs() < 1e-4, "({t1},{t2}) {q}");
    }
}

#[test]
fn factorized_form_from_sampled_densities() {
    let (sp, sm) = (1.0, 2.5);
    let j = gaussian(sp, sm, Symmetry::Symmetric);
    let wgrid = |s: f64| UniformGrid::symmetric(10.0 * s, 2001).unwrap();
    let dp = spectral_density(&j, Coordinate::Sum, wgrid(sp)).unwrap();
    let dm = spectral_density(&j, Coordinate::Difference, wgrid(sm)).unwrap();
    let delays = UniformGrid::symmetric(12.0, 2401).unwrap();
    let cp = correlation_function(&dp, delays).unwrap();
    let cm = correlation_function(&dm, delays).unwrap();
    for &(t1, t2) in &[(5.0, 0.4), (1.1, -2.3), (0.0, 0.7)] {
        let d = DelayPair::new(t1, t2).unwrap();
        let r = rate_factorized(&cp, &cm, WP, d).unwrap();
        let e = rate_factorized(&GaussianCorrelation { sigma: sp }, &GaussianCorrelation { sigma: sm }, WP, d).unwrap();
        assert!((r - oracle_symmetric(sp, sm, t1, t2)).abs() < 1e-6, "({t1},{t2}) {r}");
        assert!((e - oracle_symmetric(sp, sm, t1, t2)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_density_is_exchange_invariant(
        sp in 0.3f64..3.0, ratio in 0.1f64..10.0,
        ds in -3.0f64..3.0, di in -3.0f64..3.0,
        t1 in -8.0f64..8.0, t2 in -8.0f64..8.0,
    ) {
        let j = gaussian(sp, sp / ratio, Symmetry::Symmetric);
        let d = DelayPair::new(t1, t2).unwrap();
        let (ws, wi) = (WP / 2.0 + ds, WP / 2.0 + di);
        prop_assert_eq!(j.evaluate(ws, wi).unwrap(), j.evaluate(wi, ws).unwrap());
        let a = coincidence_density(&j, ws, wi, d).unwrap();
        let b = baseline_density(&j, ws, wi).unwrap();
        prop_assert!(a >= 0.0);
        // |P Q| <= 16 for unimodular phases, so the density never exceeds 2x the baseline
        prop_assert!(a <= 2.0 * b * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn closed_form_lies_in_zero_two(
        sp in 0.1f64..5.0, ratio in 0.1f64..10.0,
        t1 in -20.0f64..20.0, t2 in -20.0f64..20.0,
    ) {
        let r = rate_gaussian_closed(sp, sp / ratio, WP, DelayPair::new(t1, t2).unwrap());
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&r), "{}", r);
    }

    #[test]
    fn closed_form_is_even_in_tau1(
        sp in 0.1f64..5.0, sm in 0.1f64..5.0,
        t1 in -20.0f64..20.0, t2 in -20.0f64..20.0,
    ) {
        let a = rate_gaussian_closed(sp, sm, WP, DelayPair::new(t1, t2).unwrap());
        let b = rate_gaussian_closed(sp, sm, WP, DelayPair::new(-t1, t2).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn quadrature_matches_closed_form(
        sp in 0.5f64..2.0, log_ratio in -1.0f64..1.0,
        x1 in -8.0f64..8.0, x2 in -8.0f64..8.0,
    ) {
        let sm = sp / 10f64.powf(log_ratio);
        let (t1, t2) = (x1 / sp, x2 / sp);
        let j = gaussian(sp, sm, Symmetry::Symmetric);
        let q = quad(&j, t1, t2);
        prop_assert!((q - oracle_symmetric(sp, sm, t1, t2)).abs() <= 1e-6);
    }
}
