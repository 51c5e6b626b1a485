use biphoton_core::config::{preset, ScanConfig};
use biphoton_core::freq_engine::scan;
use biphoton_core::spectroscopy::{
    estimate_time_scales, extract_envelopes, reconstruct, visibilities, SpectroscopyError, Verdict,
};
use biphoton_core::{Interferogram, ModelConfig, Symmetry};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

fn preset_scan(name: &str) -> (ScanConfig, Interferogram) {
    let (_, cfg) = preset(name).unwrap().members.remove(0);
    let ig = scan(&cfg).unwrap();
    (cfg, ig)
}

fn gaussian_scan(sp: f64, sm: f64, tau1: f64, half_range: f64) -> Interferogram {
    let (_, mut cfg) = preset("fig2c").unwrap().members.remove(0);
    cfg.model = ModelConfig::GaussianProduct {
        sigma_plus: sp,
        sigma_minus: sm,
        pump_frequency: 200.0,
        symmetry: Symmetry::Symmetric,
    };
    cfg.scan.fixed_delay = Some(tau1);
    cfg.scan.range.min = -half_range;
    cfg.scan.range.max = half_range;
    let limit = biphoton_core::freq_engine::nyquist_limit(200.0, sp);
    cfg.scan.range.points = (2.0 * half_range / (0.95 * limit)).ceil() as usize + 1;
    scan(&cfg).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn fig2_presets_round_trip() {
    for (name, sp, sm, verdict) in [
        ("fig2a", 1.0, 10.0, Verdict::AntiCorrelated),
        ("fig2b", 1.0, 0.1, Verdict::Correlated),
        ("fig2c", 1.0, 1.0, Verdict::Uncorrelated),
    ] {
        let (_, ig) = preset_scan(name);
        let r = reconstruct(&ig).unwrap();
        assert!(rel(r.sigma_plus_hat, sp) < 0.02, "{name} sigma_plus_hat {}", r.sigma_plus_hat);
        assert!(rel(r.sigma_minus_hat, sm) < 0.02, "{name} sigma_minus_hat {}", r.sigma_minus_hat);
        assert!(rel(r.tau1_hat, 5.0) < 0.02, "{name} tau1_hat {}", r.tau1_hat);
        assert_eq!(r.classification().verdict, verdict, "{name}");
        let mut worst: f64 = 0.0;
        for (i, p) in r.jsi.plus.values().iter().enumerate() {
            for (j, m) in r.jsi.minus.values().iter().enumerate() {
                let truth = (-p * p / (2.0 * sp * sp) - m * m / (2.0 * sm * sm)).exp();
                worst = worst.max((r.jsi.at(i, j) - truth).abs());
            }
        }
        assert!(worst <= 0.02, "{name} jsi error {worst}");
    }
}

#[test]
fn fig2_visibilities() {
    for name in ["fig2a", "fig2b", "fig2c"] {
        let (_, ig) = preset_scan(name);
        let v = visibilities(&ig).unwrap();
        assert!((v.central - 0.5).abs() <= 0.005, "{name} central {}", v.central);
        assert!((v.side - 0.25).abs() <= 0.005, "{name} side {}", v.side);
    }
}

#[test]
fn envelopes_bracket_the_interferogram() {
    let (_, ig) = preset_scan("fig2a");
    let env = extract_envelopes(&ig).unwrap();
    let c = env.delays.position(0.0).round() as usize;
    assert!(env.lower[c].abs() < 5e-3, "dip floor {}", env.lower[c]);
    for k in 0..ig.rates.len() {
        assert!(env.upper[k] >= env.lower[k]);
        assert!(env.lower[k] > -0.02 && env.upper[k] < 2.02);
        assert!(ig.rates[k] <= env.upper[k] + 1e-2 && ig.rates[k] >= env.lower[k] - 1e-2, "k={k}");
    }
    let side = env.delays.position(5.0).round() as usize;
    assert!((env.upper[side] - 1.25).abs() < 5e-3);
    assert!((env.lower[side] - 0.75).abs() < 5e-3);
    let flat = env.delays.position(8.5).round() as usize;
    assert!((env.upper[flat] - 1.0).abs() < 2e-3 && (env.lower[flat] - 1.0).abs() < 2e-3);
}

#[test]
fn time_scales_follow_presets() {
    for (name, widths) in [("fig2a", (1.0, 0.1, 5.0)), ("fig2c", (1.0, 1.0, 5.0))] {
        let (_, ig) = preset_scan(name);
        let s = estimate_time_scales(&ig).unwrap();
        assert!(rel(s.envelope_width, widths.0) < 0.03, "{name} {s:?}");
        assert!(rel(s.dip_width, widths.1) < 0.03, "{name} {s:?}");
        assert!(rel(s.half_separation, widths.2) < 0.03, "{name} {s:?}");
    }
    let a = estimate_time_scales(&gaussian_scan(1.0, 1.0, 5.0, 12.0)).unwrap();
    let b = estimate_time_scales(&gaussian_scan(1.0, 1.0, 10.0, 18.0)).unwrap();
    assert!(rel(b.half_separation, 2.0 * a.half_separation) < 0.01);
}

#[test]
fn random_parameter_round_trips() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..10 {
        let sp: f64 = rng.random_range(0.5..2.0);
        let ratio = 10f64.powf(rng.random_range(-1.0..1.0));
        let sm = sp / ratio;
        let tau1 = rng.random_range(5.0..8.0) / sp;
        let half = tau1 + 8.0 / sp + 8.0 / sm;
        let r = reconstruct(&gaussian_scan(sp, sm, tau1, half)).unwrap();
        assert!(rel(r.sigma_plus_hat, sp) < 0.02, "sp {sp} sm {sm} t1 {tau1}: {}", r.sigma_plus_hat);
        assert!(rel(r.sigma_minus_hat, sm) < 0.02, "sp {sp} sm {sm} t1 {tau1}: {}", r.sigma_minus_hat);
        assert!(rel(r.tau1_hat, tau1) < 0.02, "sp {sp} sm {sm} t1 {tau1}: {}", r.tau1_hat);
    }
}

#[test]
fn noise_degrades_gracefully() {
    let (_, mut ig) = preset_scan("fig2c");
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let noise = Normal::new(0.0, 1e-3).unwrap();
    for r in ig.rates.iter_mut() {
        *r += noise.sample(&mut rng);
    }
    let r = reconstruct(&ig).unwrap();
    assert!(rel(r.sigma_plus_hat, 1.0) < 0.05, "{}", r.sigma_plus_hat);
    assert!(rel(r.sigma_minus_hat, 1.0) < 0.05, "{}", r.sigma_minus_hat);
    assert!(rel(r.tau1_hat, 5.0) < 0.05, "{}", r.tau1_hat);
}

#[test]
fn overlapping_packets_are_rejected() {
    let ig = gaussian_scan(1.0, 1.0, 2.5, 12.0);
    assert!(matches!(reconstruct(&ig), Err(SpectroscopyError::PacketsOverlap(_))));
    let ig = gaussian_scan(1.0, 1.0, 4.0, 12.0);
    assert!(matches!(reconstruct(&ig), Err(SpectroscopyError::PacketsOverlap(_))));
}

#[test]
fn coarse_sampling_is_rejected() {
    let (_, mut ig) = preset_scan("fig2c");
    let keep: Vec<f64> = ig.rates.iter().step_by(4).cloned().collect();
    ig.delays.step *= 4.0;
    ig.delays.len = keep.len();
    ig.rates = keep;
    assert!(matches!(reconstruct(&ig), Err(SpectroscopyError::CarrierNotResolved(_))));
}

#[test]
fn antisymmetric_input_is_rejected() {
    let (_, mut ig) = preset_scan("fig2c");
    for r in ig.rates.iter_mut() {
        *r = 2.0 - *r;
    }
    assert!(matches!(reconstruct(&ig), Err(SpectroscopyError::AntisymmetricInput { .. })));
}

#[test]
fn wrong_axis_is_rejected() {
    let (_, mut ig) = preset_scan("fig2c");
    ig.scan_axis = biphoton_core::ScanAxis::Tau1AtFixedTau2;
    assert!(matches!(reconstruct(&ig), Err(SpectroscopyError::WrongScanAxis(_))));
}
