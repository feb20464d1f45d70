//! Linear response against direct integration of the master equation.
//!
//!     cargo run --release --example oracle_check -- [omega_p]

use bichromatic_eit::oracle::{oracle_a0, IntegrationSettings};
use bichromatic_eit::prelude::*;
use bichromatic_eit::spectroscopy::uniform_grid;

fn main() -> Result<()> {
    let omega_p: f64 = std::env::args().nth(1).map_or(0.01, |s| s.parse().expect("omega_p"));
    let cfg = Configuration::new(
        AtomicLevelScheme::default(),
        BichromaticDrive::resonant(0.4, 0.7),
        ProbeField::new(omega_p, 0.0),
        SolverSettings::default(),
    )?;
    println!("Ω_p = {omega_p}Γ");
    println!("{:>8} {:>24} {:>24} {:>10} {:>8}", "Δ_p", "linear a_0", "master equation a_0", "rel. dev", "periods");
    for dp in uniform_grid(-1.4, 1.4, 8) {
        let at = cfg.at_detuning(dp);
        let linear = probe_response(&at)?.a0;
        let (full, traj) = oracle_a0(&at, &IntegrationSettings::for_config(&at))?;
        println!(
            "{dp:>8.3} {:>11.4e}{:>+12.4e}i {:>11.4e}{:>+12.4e}i {:>10.2e} {:>8}",
            linear.re,
            linear.im,
            full.re,
            full.im,
            (linear - full).norm() / full.norm(),
            traj.periods
        );
    }
    Ok(())
}
