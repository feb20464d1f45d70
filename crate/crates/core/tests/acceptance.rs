//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

use std::time::Instant;

use bichromatic_eit::fitting::{fit, synthetic_trace, Bounded, FitParameters, FitSettings, TraceKind};
use bichromatic_eit::linear_response::{build_recurrence, monochromatic_a0, probe_response_at, solve};
use bichromatic_eit::model::validate;
use bichromatic_eit::oracle::{extract_harmonic, oracle_a0, IntegrationSettings, StateDiagnostics};
use bichromatic_eit::prelude::*;
use bichromatic_eit::spectroscopy::uniform_grid;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PEAK_THRESHOLD: f64 = 0.05;
const POSITION_TOL: f64 = 0.05;
const SCAN_BUDGET_S: f64 = 5.0;
const DARK_LIMIT: f64 = 1e-3;
const CLOSED_FORM_TOL: f64 = 1e-12;
const LADDER_TOL: f64 = 0.1;
const ORACLE_TOL: f64 = 1e-3;
const ORACLE_BUDGET_S: f64 = 300.0;
const METHOD_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-9;
const SEPARATION_TOL_MHZ: f64 = 1.0;
const ASYMMETRY_FRACTION: f64 = 0.05;
const NOISE_FREE_TOL: f64 = 0.02;
const NOISY_OMEGA_TOL: f64 = 0.05;
const TRACE_TOL: f64 = 1e-9;
const HERMITICITY_TOL: f64 = 1e-12;
const EIGENVALUE_FLOOR: f64 = -1e-8;
const DT_HALVING_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gamma_cfg(drive: BichromaticDrive, scheme: AtomicLevelScheme, omega_p: f64) -> Configuration {
    Configuration::new(scheme, drive, ProbeField::new(omega_p, 0.0), SolverSettings::default()).unwrap()
}

fn fig2a() -> Configuration {
    gamma_cfg(BichromaticDrive::resonant(0.4, 0.7), AtomicLevelScheme::default(), 0.01)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn peak_count_fig2a() -> Result<usize> {
    Ok(find_peaks(&scan(&fig2a(), (-2.0, 2.0), 801)?, PEAK_THRESHOLD)?.len())
}

fn criterion_1() -> Result<Outcome> {
    let cfg = fig2a();
    let start = Instant::now();
    let trace = scan(&cfg, (-2.0, 2.0), 801)?;
    let elapsed = start.elapsed().as_secs_f64();
    let peaks = find_peaks(&trace, PEAK_THRESHOLD)?;
    let peaks_ok = peaks.len() == 3
        && peaks
            .positions
            .iter()
            .zip([-0.7, 0.0, 0.7])
            .all(|(p, want)| (p - want).abs() < POSITION_TOL);
    let windows = if peaks.len() >= 2 { transparency_minima(&trace, &peaks)? } else { Vec::new() };
    let minima: Vec<f64> = windows.iter().map(|w| w.position).collect();
    let minima_ok = minima.len() == 2
        && minima
            .iter()
            .zip([-0.35, 0.35])
            .all(|(p, want)| (p - want).abs() < POSITION_TOL);
    let slopes = minima
        .iter()
        .map(|&x| dispersion_slope(&cfg, x, 1e-3))
        .collect::<Result<Vec<_>>>()?;
    let slopes_ok = !slopes.is_empty() && slopes.iter().all(|&s| s > 0.0);
    let time_ok = elapsed < SCAN_BUDGET_S;
    Ok(outcome(
        peaks_ok && minima_ok && slopes_ok && time_ok,
        format!(
            "peaks {:?} [{}], minima {:?} [{}], slopes {:?} [{}], scan {:.3} s [{}]",
            round(&peaks.positions),
            ok(peaks_ok),
            round(&minima),
            ok(minima_ok),
            round(&slopes),
            ok(slopes_ok),
            elapsed,
            ok(time_ok)
        ),
    ))
}

fn criterion_2() -> Result<Outcome> {
    let scheme = AtomicLevelScheme::default().with_gamma21(0.0);
    let cfg = gamma_cfg(BichromaticDrive::monochromatic(0.4, 0.0), scheme, 0.01);
    let centre = probe_response_at(&cfg, 0.0)?.absorption;
    let mut worst = 0.0f64;
    for dp in uniform_grid(-2.0, 2.0, 201) {
        let got = probe_response_at(&cfg, dp)?.a0;
        let want = monochromatic_a0(1.0, 0.0, 0.4, 0.01, 0.0, dp);
        let err = if want.norm() == 0.0 { got.norm() / 0.01 } else { rel(got, want) };
        worst = worst.max(err);
    }
    Ok(outcome(
        centre.abs() < DARK_LIMIT && worst < CLOSED_FORM_TOL,
        format!("absorption at line centre {centre:.3e}, worst closed-form deviation {worst:.3e} over 201 detunings"),
    ))
}

fn criterion_3() -> Result<Outcome> {
    let cfg = gamma_cfg(BichromaticDrive::resonant(2.0, 3.35), AtomicLevelScheme::default(), 0.01);
    let peaks = find_peaks(&scan(&cfg, (-10.0, 10.0), 2001)?, PEAK_THRESHOLD)?;
    let reference = peak_count_fig2a()?;
    let on_ladder = peaks.positions.iter().all(|p| {
        let m = (p / 3.35).round();
        (p - m * 3.35).abs() < LADDER_TOL
    });
    Ok(outcome(
        peaks.len() > reference && on_ladder,
        format!(
            "{} peaks (reference {reference}) at {:?}, on ladder: {}",
            peaks.len(),
            round(&peaks.positions),
            on_ladder
        ),
    ))
}

fn criterion_4_and_10() -> Result<(Outcome, Outcome)> {
    let cfg = fig2a();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut diagnostics = Vec::new();
    for dp in uniform_grid(-1.4, 1.4, 10) {
        let at = cfg.at_detuning(dp);
        let (a0, traj) = oracle_a0(&at, &IntegrationSettings::for_config(&at))?;
        worst = worst.max(rel(probe_response_at(&at, dp)?.a0, a0));
        diagnostics.push(traj.diagnostics);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let c4 = outcome(
        worst < ORACLE_TOL && elapsed < ORACLE_BUDGET_S,
        format!("max relative deviation {worst:.3e} over 10 detunings, {elapsed:.1} s"),
    );

    let mut shift = 0.0f64;
    for dp in [-1.4, 0.35, 0.7] {
        let at = cfg.at_detuning(dp);
        let coarse = IntegrationSettings::for_config(&at);
        let (_, t1) = oracle_a0(&at, &coarse)?;
        let (_, t2) = oracle_a0(&at, &coarse.with_dt(coarse.dt / 2.0))?;
        for n in [-2, 0, 2] {
            let h1 = extract_harmonic(&t1, (3, 1), n)?;
            let h2 = extract_harmonic(&t2, (3, 1), n)?;
            shift = shift.max(rel(h1, h2));
        }
        diagnostics.push(t1.diagnostics);
        diagnostics.push(t2.diagnostics);
    }
    let worst_state = diagnostics.iter().fold(
        StateDiagnostics {
            max_trace_deviation: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
        },
        |acc, d| StateDiagnostics {
            max_trace_deviation: acc.max_trace_deviation.max(d.max_trace_deviation),
            max_hermiticity_error: acc.max_hermiticity_error.max(d.max_hermiticity_error),
            min_eigenvalue: acc.min_eigenvalue.min(d.min_eigenvalue),
        },
    );
    let c10 = outcome(
        worst_state.max_trace_deviation < TRACE_TOL
            && worst_state.max_hermiticity_error < HERMITICITY_TOL
            && worst_state.min_eigenvalue > EIGENVALUE_FLOOR
            && shift < DT_HALVING_TOL,
        format!(
            "trace {:.2e}, hermiticity {:.2e}, min eigenvalue {:.2e} over {} trajectories; dt halving shift {shift:.2e}",
            worst_state.max_trace_deviation,
            worst_state.max_hermiticity_error,
            worst_state.min_eigenvalue,
            diagnostics.len()
        ),
    );
    Ok((c4, c10))
}

fn criterion_5() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let banded = SolverSettings::default();
    let cf = banded.with_method(SolverMethod::ContinuedFraction);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let delta = rng.random_range(0.2..7.0);
        let drive = BichromaticDrive {
            omega_c1: rng.random_range(0.0..3.0),
            omega_c2: rng.random_range(0.0..3.0),
            delta,
            delta_c2: delta + rng.random_range(-2.0..2.0),
        };
        let scheme = AtomicLevelScheme::default().with_gamma21(rng.random_range(0.0..0.1));
        let cfg = gamma_cfg(drive, scheme, 0.01);
        let rec = build_recurrence(&cfg, rng.random_range(-3.0 * delta..3.0 * delta));
        worst = worst.max(rel(solve(&rec, &banded)?.a0(), solve(&rec, &cf)?.a0()));
    }
    Ok(outcome(worst < METHOD_TOL, format!("max relative difference {worst:.3e} over 100 random sets")))
}

fn criterion_6() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut odd, mut asym) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let delta = rng.random_range(0.2..7.0);
        let cfg = gamma_cfg(
            BichromaticDrive::resonant(rng.random_range(0.0..3.0), delta),
            AtomicLevelScheme::default().with_gamma21(rng.random_range(0.0..0.1)),
            0.01,
        );
        for _ in 0..4 {
            let dp = rng.random_range(0.0..3.0 * delta);
            let h = solve(&build_recurrence(&cfg, dp), &cfg.settings)?;
            odd = h.orders().filter(|n| n % 2 != 0).map(|n| h.a(n).norm()).fold(odd, f64::max);
            let (p, m) = (probe_response_at(&cfg, dp)?, probe_response_at(&cfg, -dp)?);
            asym = asym.max((p.absorption - m.absorption).abs()).max((p.dispersion + m.dispersion).abs());
        }
    }
    Ok(outcome(
        odd == 0.0 && asym < SYMMETRY_TOL,
        format!("max |odd a_n| {odd:e}, max symmetry violation {asym:.3e} over 200 points"),
    ))
}

fn rb(omega_gamma: f64, delta_mhz: f64, delta_c2_mhz: f64) -> Result<Configuration> {
    validate(
        AtomicLevelScheme {
            gamma: 6.0,
            gamma21: 0.06,
            ..Default::default()
        },
        BichromaticDrive {
            delta_c2: delta_c2_mhz,
            ..BichromaticDrive::resonant(omega_gamma * 6.0, delta_mhz)
        },
        ProbeField::new(0.06, 0.0),
        SolverSettings::default(),
        Units::MHz,
    )
}

fn criterion_7() -> Result<Outcome> {
    let mut sets = Vec::new();
    for omega in [1.5, 2.35] {
        let cfg = rb(omega, 20.0, 20.0)?;
        let trace = scan(&cfg, (cfg.from_mhz(-60.0), cfg.from_mhz(60.0)), 1201)?;
        let gaps: Vec<f64> = peak_separations(&find_peaks(&trace, PEAK_THRESHOLD)?)?
            .into_iter()
            .map(|g| cfg.to_mhz(g))
            .collect();
        sets.push(gaps);
    }
    let law = !sets[0].is_empty() && sets.iter().flatten().all(|g| (g - 20.0).abs() < SEPARATION_TOL_MHZ);
    let same = sets[0].len() == sets[1].len()
        && sets[0].iter().zip(&sets[1]).all(|(a, b)| (a - b).abs() < SEPARATION_TOL_MHZ);
    Ok(outcome(
        law && same,
        format!("separations (MHz) at 1.5Γ {:?}, at 2.35Γ {:?}", round(&sets[0]), round(&sets[1])),
    ))
}

fn criterion_8() -> Result<Outcome> {
    let mut ratios = Vec::new();
    for dc2 in [1.34, 3.34, 5.7] {
        let cfg = gamma_cfg(
            BichromaticDrive {
                delta_c2: dc2,
                ..BichromaticDrive::resonant(2.2, 3.35)
            },
            AtomicLevelScheme::default(),
            0.01,
        );
        let trace = scan(&cfg, (-12.0, 12.0), 1201)?;
        ratios.push(trace.asymmetry()? / trace.max_absorption());
    }
    Ok(outcome(
        ratios.iter().all(|&r| r > ASYMMETRY_FRACTION),
        format!("asymmetry / max absorption {:?} for Δ_c2 = 1.34, 3.34, 5.7Γ", round(&ratios)),
    ))
}

fn criterion_9() -> Result<Outcome> {
    let scheme = AtomicLevelScheme::default();
    let truth = FitParameters::fixed(2.3, 40.0, 0.01, 2.0, 0.3, 0.0);
    let initial = FitParameters {
        omega_c: Bounded::free(2.3 * 1.2, 0.5, 4.0),
        delta_c2: Bounded::free(40.0 * 0.8, 20.0, 60.0),
        zeeman_sigma: Bounded::free(2.0 * 1.2, 0.0, 6.0),
        amplitude: Bounded::free(0.3 * 0.8, 0.0, 1.0),
        ..truth
    };
    let grid = uniform_grid(-80.0, 80.0, 801);
    let free = [0, 1, 3, 4];

    let settings = FitSettings::default();
    let clean = synthetic_trace(&truth, grid.clone(), TraceKind::Absorption, &scheme, &settings, None)?;
    let result = fit(&initial, &clean, &scheme, &settings)?;
    let (got, want) = (result.parameters.values(), truth.values());
    let clean_err = free.iter().map(|&i| (got[i] / want[i] - 1.0).abs()).fold(0.0, f64::max);

    let mut noisy_err = 0.0f64;
    for seed in 0..10u64 {
        let settings = FitSettings::default().with_seed(seed);
        let trace = synthetic_trace(
            &truth,
            grid.clone(),
            TraceKind::Absorption,
            &scheme,
            &settings,
            Some((0.01, 1000 + seed)),
        )?;
        let r = fit(&initial, &trace, &scheme, &settings)?;
        noisy_err = noisy_err.max((r.parameters.omega_c.value / 2.3 - 1.0).abs());
    }
    Ok(outcome(
        clean_err < NOISE_FREE_TOL && noisy_err < NOISY_OMEGA_TOL,
        format!(
            "noise-free worst free-parameter error {:.3}%, 1% noise worst Ω_c error {:.3}% over 10 seeds",
            100.0 * clean_err,
            100.0 * noisy_err
        ),
    ))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "fail"
    }
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

fn report(n: usize, name: &str, result: Result<Outcome>) -> bool {
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("criterion {n:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    let (c4, c10) = match criterion_4_and_10() {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => (Err(e), Err(bichromatic_eit::Error::InvalidInput("oracle run failed".into()))),
    };
    let results = [
        report(1, "moderate bichromatic structure", criterion_1()),
        report(2, "monochromatic limit", criterion_2()),
        report(3, "strong bichromatic structure", criterion_3()),
        report(4, "oracle equivalence", c4),
        report(5, "method agreement", criterion_5()),
        report(6, "parity and symmetry", criterion_6()),
        report(7, "peak-separation law", criterion_7()),
        report(8, "asymmetry", criterion_8()),
        report(9, "fit round trip", criterion_9()),
        report(10, "oracle state validity", c10),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
