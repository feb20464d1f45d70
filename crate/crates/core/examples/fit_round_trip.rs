//! Generate a noisy absorption trace with 2δ = 80 MHz, then fit it back.
//!
//!     cargo run --release --example fit_round_trip -- [noise] [seed]

use std::time::Instant;

use bichromatic_eit::fitting::{fit, synthetic_trace, Bounded, FitParameters, FitSettings, TraceKind};
use bichromatic_eit::model::AtomicLevelScheme;
use bichromatic_eit::spectroscopy::uniform_grid;

fn main() -> bichromatic_eit::Result<()> {
    let mut args = std::env::args().skip(1);
    let noise: f64 = args.next().map_or(Ok(0.01), |s| s.parse()).expect("noise level");
    let seed: u64 = args.next().map_or(Ok(7), |s| s.parse()).expect("seed");

    let scheme = AtomicLevelScheme::default();
    let settings = FitSettings::default().with_seed(seed);
    let truth = FitParameters::fixed(2.3, 40.0, 0.01, 2.0, 0.3, 0.0);
    let grid = uniform_grid(-80.0, 80.0, 801);
    let trace = synthetic_trace(
        &truth,
        grid,
        TraceKind::Absorption,
        &scheme,
        &settings,
        Some((noise, seed)),
    )?;

    let initial = FitParameters {
        omega_c: Bounded::free(1.9, 0.5, 4.0),
        delta_c2: Bounded::free(44.0, 20.0, 60.0),
        zeeman_sigma: Bounded::free(2.3, 0.0, 6.0),
        amplitude: Bounded::free(0.25, 0.0, 1.0),
        ..truth
    };

    let start = Instant::now();
    let result = fit(&initial, &trace, &scheme, &settings)?;
    let elapsed = start.elapsed();

    println!("noise {noise}, seed {seed}");
    println!("{:>14} {:>12} {:>12}", "parameter", "true", "fitted");
    let names = ["omega_c", "delta_c2", "gamma21", "zeeman_sigma", "amplitude", "baseline"];
    for ((name, t), f) in names.iter().zip(truth.values()).zip(result.parameters.values()) {
        println!("{name:>14} {t:>12.5} {f:>12.5}");
    }
    println!(
        "residual {:.3e} after {} evaluations ({:.1} s), converged: {}",
        result.residual,
        result.n_evaluations,
        elapsed.as_secs_f64(),
        result.converged
    );
    Ok(())
}
