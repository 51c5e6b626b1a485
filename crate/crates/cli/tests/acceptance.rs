//! Acceptance run: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use biphoton_core::audit::{delay_grid, run_audit};
use biphoton_core::config::{preset, ScanConfig};
use biphoton_core::freq_engine::{
    homi_rate, nyquist_limit, rate_asymptotic_fixed_tau1, rate_asymptotic_fixed_tau2, rate_gaussian_closed,
    rate_quadrature, scan, scan_with, DelayPair, Engine, GaussianParams, Interferogram, QuadratureSpec,
};
use biphoton_core::numeric::UniformGrid;
use biphoton_core::spectroscopy::{extract_envelopes, reconstruct, visibilities, Verdict};
use biphoton_core::{make_gaussian_jsa, JointSpectralAmplitude, Symmetry};
use rand::{Rng, SeedableRng};

const FIG2: [(&str, f64, f64); 3] = [("fig2a", 1.0, 10.0), ("fig2b", 1.0, 0.1), ("fig2c", 1.0, 1.0)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn preset_config(name: &str) -> ScanConfig {
    preset(name).unwrap().members.remove(0).1
}

fn preset_scan(name: &str) -> Interferogram {
    scan(&preset_config(name)).unwrap()
}

fn jsa(sp: f64, sm: f64, sym: Symmetry) -> JointSpectralAmplitude {
    make_gaussian_jsa(sp, sm, 200.0, sym).unwrap()
}

fn quad(j: &JointSpectralAmplitude, d: DelayPair) -> f64 {
    rate_quadrature(j, d, &QuadratureSpec::default()).unwrap().normalize()
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (name, sp, sm) in FIG2 {
        let ig = preset_scan(name);
        let j = jsa(sp, sm, Symmetry::Symmetric);
        let stride = ig.len() / 70;
        for d in ig.pairs().into_iter().step_by(stride) {
            worst = worst.max((quad(&j, d) - rate_gaussian_closed(sp, sm, 200.0, d)).abs());
            count += 1;
        }
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    for _ in 0..20 {
        let sp: f64 = rng.random_range(0.5..2.0);
        let sm = sp / 10f64.powf(rng.random_range(-1.0..=1.0));
        let j = jsa(sp, sm, Symmetry::Symmetric);
        for _ in 0..5 {
            let d = DelayPair::new(rng.random_range(-8.0..=8.0) / sp, rng.random_range(-8.0..=8.0) / sp).unwrap();
            worst = worst.max((quad(&j, d) - rate_gaussian_closed(sp, sm, 200.0, d)).abs());
            count += 1;
        }
    }
    outcome(worst <= 1e-6, format!("max |quadrature - closed form| = {worst:.2e} over {count} points (tol 1e-6)"))
}

fn zero_line() -> Outcome {
    let mut worst_closed: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    for (_, sp, sm) in FIG2 {
        let j = jsa(sp, sm, Symmetry::Symmetric);
        for k in 0..50 {
            let d = DelayPair::new(-8.0 + 16.0 * k as f64 / 49.0, 0.0).unwrap();
            worst_closed = worst_closed.max(rate_gaussian_closed(sp, sm, 200.0, d).abs());
            worst_quad = worst_quad.max(quad(&j, d).abs());
        }
    }
    outcome(
        worst_closed <= 1e-9 && worst_quad <= 1e-8,
        format!("max |R(tau1, 0)| closed {worst_closed:.2e} (tol 1e-9), quadrature {worst_quad:.2e} (tol 1e-8)"),
    )
}

fn hom_reduction() -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, sp, sm) in FIG2 {
        let j = jsa(sp, sm, Symmetry::Symmetric);
        for k in 0..101 {
            let t2 = (-5.0 + 10.0 * k as f64 / 100.0) / sm;
            let d = DelayPair::new(0.0, t2).unwrap();
            let hom = 1.0 - (-sm * sm * t2 * t2 / 2.0).exp();
            worst = worst.max((quad(&j, d) - hom).abs());
            worst = worst.max((rate_gaussian_closed(sp, sm, 200.0, d) - hom).abs());
        }
    }
    outcome(worst <= 1e-8, format!("max |R(0, tau2) - HOM| = {worst:.2e} (tol 1e-8)"))
}

fn visibility() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, _, _) in FIG2 {
        let v = visibilities(&preset_scan(name)).unwrap();
        pass &= (v.central - 0.5).abs() <= 0.005 && (v.side - 0.25).abs() <= 0.005;
        parts.push(format!("{name} central {:.4} side {:.4}", v.central, v.side));
    }
    outcome(pass, format!("{} (targets 0.50/0.25 +- 0.005)", parts.join(", ")))
}

fn asymptotic_bounds() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, sp, sm) in FIG2 {
        let cfg = preset_config(name);
        let p = GaussianParams {
            sigma_plus: sp,
            sigma_minus: sm,
            pump_frequency: 200.0,
        };
        let tau1 = cfg.scan.fixed_delay.unwrap();
        let grid = cfg.scan.range.grid().unwrap();
        let a = rate_asymptotic_fixed_tau1(&p, tau1, grid).unwrap();
        let dev7 = a
            .pairs()
            .iter()
            .zip(&a.rates)
            .map(|(d, r)| (r - rate_gaussian_closed(sp, sm, 200.0, *d)).abs())
            .fold(0.0, f64::max);
        let bound7 = 0.5 * (-sp * sp * tau1 * tau1 / 2.0).exp();

        let tau2 = 5.0 / sp.min(sm);
        let half = tau2 + 8.0 / sp;
        let n = (2.0 * half / nyquist_limit(200.0, sp)).ceil() as usize + 1;
        let grid = UniformGrid::symmetric(half, n).unwrap();
        let b = rate_asymptotic_fixed_tau2(&p, tau2, grid).unwrap();
        let dev8 = b
            .pairs()
            .iter()
            .zip(&b.rates)
            .map(|(d, r)| (r - rate_gaussian_closed(sp, sm, 200.0, *d)).abs())
            .fold(0.0, f64::max);
        let bound8 = (-(sp * tau2).powi(2).min((sm * tau2).powi(2)) / 2.0).exp();
        // size of the terms the far-HOM form drops, for the log
        let g = |s: f64| (-(s * tau2).powi(2) / 2.0).exp();
        let dropped = g(sm) + 0.5 * g(sp);
        pass &= dev7 <= bound7 && dev8 <= bound8;
        parts.push(format!(
            "{name} fixed-tau1 form {dev7:.2e}/{bound7:.2e}, fixed-tau2 form (tau2={tau2}) {dev8:.2e}/{bound8:.2e} (dropped terms reach {dropped:.2e})"
        ));
    }
    outcome(pass, format!("max deviation / bound: {}", parts.join(", ")))
}

fn dual_domain() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, sp, sm) in FIG2 {
        let j = jsa(sp, sm, Symmetry::Symmetric);
        let r = run_audit(&j, &delay_grid(5.0 / sp, 5), &QuadratureSpec::default()).unwrap();
        let groups = r.max_group_error.unwrap();
        let residual = r.max_residual.unwrap();
        pass &= r.max_dual_domain <= 1e-5 && groups <= 1e-6 && residual <= 1e-10;
        parts.push(format!(
            "{name} dual {:.2e} groups {groups:.2e} residual {residual:.2e}",
            r.max_dual_domain
        ));
    }
    outcome(pass, format!("{} (tol 1e-5 / 1e-6 / 1e-10)", parts.join(", ")))
}

fn baselines() -> Outcome {
    let q = QuadratureSpec::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, sp, sm) in FIG2 {
        let sym = jsa(sp, sm, Symmetry::Symmetric);
        let anti = jsa(sp, sm, Symmetry::Antisymmetric);
        let dip = homi_rate(&sym, 0.0, &q).unwrap();
        let peak = homi_rate(&anti, 0.0, &q).unwrap();
        let period = biphoton_core::audit::noon_fringe_period(&sym, &q).unwrap();
        let rel = (period / (2.0 * std::f64::consts::PI / 200.0) - 1.0).abs();
        pass &= dip.abs() <= 1e-9 && (peak - 2.0).abs() <= 1e-6 && rel <= 1e-3;
        parts.push(format!("{name} dip {dip:.2e} peak {peak:.9} period rel err {rel:.2e}"));
    }
    outcome(pass, parts.join(", "))
}

fn antisymmetric_flip() -> Outcome {
    let cfg = preset_config("fig2a");
    let sym_ig = scan(&cfg).unwrap();
    let anti = jsa(1.0, 10.0, Symmetry::Antisymmetric);
    let anti_ig = scan_with(&cfg, &anti, Engine::Quadrature).unwrap();
    let pointwise = sym_ig
        .rates
        .iter()
        .zip(&anti_ig.rates)
        .map(|(s, a)| (s + a - 2.0).abs())
        .fold(0.0, f64::max);
    if pointwise <= 1e-6 {
        return outcome(true, format!("pointwise max |R_anti + R_sym - 2| = {pointwise:.2e}"));
    }
    let es = extract_envelopes(&sym_ig).unwrap();
    let ea = extract_envelopes(&anti_ig).unwrap();
    let mirror = (0..es.delays.len)
        .map(|k| (ea.upper[k] - (2.0 - es.lower[k])).abs().max((ea.lower[k] - (2.0 - es.upper[k])).abs()))
        .fold(0.0, f64::max);
    outcome(
        mirror <= 1e-3,
        format!("pointwise max |R_anti + R_sym - 2| = {pointwise:.3} (tol 1e-6); envelope mirror deviation {mirror:.3} (tol 1e-3)"),
    )
}

fn inverse_round_trip() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for ((name, sp, sm), verdict) in FIG2.into_iter().zip([Verdict::AntiCorrelated, Verdict::Correlated, Verdict::Uncorrelated]) {
        let r = reconstruct(&preset_scan(name)).unwrap();
        let e = [
            (r.sigma_plus_hat / sp - 1.0).abs(),
            (r.sigma_minus_hat / sm - 1.0).abs(),
            (r.tau1_hat / 5.0 - 1.0).abs(),
        ];
        let mut jsi: f64 = 0.0;
        for (i, p) in r.jsi.plus.values().iter().enumerate() {
            for (k, m) in r.jsi.minus.values().iter().enumerate() {
                let truth = (-p * p / (2.0 * sp * sp) - m * m / (2.0 * sm * sm)).exp();
                jsi = jsi.max((r.jsi.at(i, k) - truth).abs());
            }
        }
        let got = r.classification().verdict;
        pass &= e.iter().all(|x| *x <= 0.02) && jsi <= 0.02 && got == verdict;
        parts.push(format!(
            "{name} rel err ({:.1e}, {:.1e}, {:.1e}) {got:?} jsi {jsi:.1e}",
            e[0], e[1], e[2]
        ));
    }
    outcome(pass, parts.join(", "))
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_biphoton");
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| -> Vec<u8> {
        let out = dir.path().join(sub);
        let status = Command::new(exe)
            .args(["simulate", "--preset", "fig2c", "--out"])
            .arg(&out)
            .env("BIPHOTON_THREADS", "1")
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("fig2c.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    let strip = |sub: &str| -> serde_json::Value {
        let p = dir.path().join(sub).join("fig2c.json");
        let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(Path::new(&p)).unwrap()).unwrap();
        let obj = v.as_object_mut().unwrap();
        obj.remove("run");
        obj.get_mut("config").unwrap()["output"]["dir"] = serde_json::Value::Null;
        v
    };
    let same_sidecar = strip("a") == strip("b");
    outcome(
        a == b && same_sidecar,
        format!("{} bytes, data identical: {}, sidecar identical outside run block: {same_sidecar}", a.len(), a == b),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("zero line", zero_line),
        ("HOM reduction", hom_reduction),
        ("visibilities", visibility),
        ("asymptotic bounds", asymptotic_bounds),
        ("dual-domain agreement", dual_domain),
        ("baselines", baselines),
        ("antisymmetric flip", antisymmetric_flip),
        ("inverse round trip", inverse_round_trip),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
