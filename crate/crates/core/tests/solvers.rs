use bichromatic_eit::linear_response::{
    build_recurrence, monochromatic_a0, probe_response_at, solve, solve_banded, solve_continued_fraction,
};
use bichromatic_eit::prelude::*;
use proptest::prelude::*;

fn cfg(omega: f64, delta: f64, delta_c2: f64) -> Configuration {
    let drive = BichromaticDrive {
        delta_c2,
        ..BichromaticDrive::resonant(omega, delta)
    };
    Configuration::new(AtomicLevelScheme::default(), drive, ProbeField::default(), SolverSettings::default()).unwrap()
}

fn rel(a: num_complex::Complex64, b: num_complex::Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn strong_drive_cross_method_at_sideband() {
    let c = cfg(2.0, 3.35, 3.35);
    let rec = build_recurrence(&c, 3.35);
    let cf = solve_continued_fraction(&rec, 1e-13).unwrap();
    let banded = solve_banded(&rec, 64).unwrap();
    assert!(rel(cf.a0(), banded.a0()) < 1e-10);
}

#[test]
fn monochromatic_limit_is_dark_and_closed_form() {
    let scheme = AtomicLevelScheme::default().with_gamma21(0.0);
    let c = Configuration::new(
        scheme,
        BichromaticDrive::monochromatic(0.4, 0.0),
        ProbeField::default(),
        SolverSettings::default(),
    )
    .unwrap();
    assert!(probe_response_at(&c, 0.0).unwrap().absorption.abs() < 1e-3);
    for i in 0..201 {
        let dp = -2.0 + 0.02 * i as f64 + 1e-3;
        let got = probe_response_at(&c, dp).unwrap().a0;
        let want = monochromatic_a0(1.0, 0.0, 0.4, 0.01, 0.0, dp);
        assert!(rel(got, want) < 1e-12, "Δp = {dp}");
    }
}

#[test]
fn harmonic_truncation_is_converged() {
    let c = cfg(3.0, 0.2, 0.2);
    let rec = build_recurrence(&c, 0.1);
    let a = solve(&rec, &c.settings).unwrap();
    let b = solve_banded(&rec, 2 * a.n_max).unwrap();
    assert!(rel(a.a0(), b.a0()) < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn banded_and_continued_fraction_agree(
        omega in 0.01f64..3.0,
        delta in 0.2f64..7.0,
        detune in -1.0f64..1.0,
        dp_scale in -3.0f64..3.0,
    ) {
        let c = cfg(omega, delta, delta + detune);
        let dp = dp_scale * delta;
        let banded = probe_response_at(&c, dp).unwrap().a0;
        let cf_cfg = c.with_settings(c.settings.with_method(SolverMethod::ContinuedFraction)).unwrap();
        let cf = probe_response_at(&cf_cfg, dp).unwrap().a0;
        prop_assert!(rel(banded, cf) < 1e-10, "{banded} vs {cf}");
    }

    #[test]
    fn odd_harmonics_vanish(omega in 0.01f64..3.0, delta in 0.2f64..7.0, dp in -5.0f64..5.0) {
        let c = cfg(omega, delta, delta);
        let rec = build_recurrence(&c, dp);
        let h = solve(&rec, &c.settings).unwrap();
        for n in h.orders().filter(|n| n % 2 != 0) {
            prop_assert_eq!(h.a(n).norm(), 0.0);
        }
    }

    #[test]
    fn resonant_drive_is_symmetric(omega in 0.01f64..3.0, delta in 0.2f64..7.0, dp in 0.0f64..5.0) {
        let c = cfg(omega, delta, delta);
        let plus = probe_response_at(&c, dp).unwrap();
        let minus = probe_response_at(&c, -dp).unwrap();
        prop_assert!((plus.absorption - minus.absorption).abs() < 1e-9);
        prop_assert!((plus.dispersion + minus.dispersion).abs() < 1e-9);
    }

    #[test]
    fn absorption_is_not_gain(omega in 0.01f64..3.0, delta in 0.2f64..7.0, detune in -2.0f64..2.0, dp in -8.0f64..8.0) {
        let c = cfg(omega, delta, delta + detune);
        prop_assert!(probe_response_at(&c, dp).unwrap().absorption >= -1e-9);
    }
}
