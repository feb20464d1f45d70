//! Banded Floquet solve against the continued fraction on random drives.
//!
//!     cargo run --release --example method_cross_check -- [count] [seed]

use bichromatic_eit::linear_response::{build_recurrence, solve};
use bichromatic_eit::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(20, |s| s.parse().expect("count"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let banded = SolverSettings::default();
    let cf = SolverSettings::default().with_method(SolverMethod::ContinuedFraction);
    let mut worst = 0.0f64;
    println!("{:>7} {:>7} {:>8} {:>8} {:>12} {:>5}", "Ω_c", "δ", "Δ_c2", "Δ_p", "rel. diff", "n");
    for _ in 0..count {
        let omega = rng.random_range(0.05..3.0);
        let delta = rng.random_range(0.2..7.0);
        let drive = BichromaticDrive {
            delta_c2: delta + rng.random_range(-1.0..1.0),
            ..BichromaticDrive::resonant(omega, delta)
        };
        let cfg = Configuration::new(AtomicLevelScheme::default(), drive, ProbeField::default(), banded)?;
        let dp = rng.random_range(-3.0 * delta..3.0 * delta);
        let rec = build_recurrence(&cfg, dp);
        let a = solve(&rec, &banded)?;
        let b = solve(&rec, &cf)?;
        let diff = (a.a0() - b.a0()).norm() / b.a0().norm();
        worst = worst.max(diff);
        println!("{omega:>7.3} {delta:>7.3} {:>8.3} {dp:>8.3} {diff:>12.3e} {:>5}", drive.delta_c2, a.n_max);
    }
    println!("largest relative difference {worst:.3e}");
    Ok(())
}
