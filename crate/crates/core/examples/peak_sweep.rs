//! Peak positions at 2δ = 40 MHz as the coupling Rabi frequency shrinks from
//! 2.35Γ to 1.5Γ: the spacing stays at δ.
//!
//!     cargo run --release --example peak_sweep

use bichromatic_eit::model::validate;
use bichromatic_eit::prelude::*;

fn main() -> Result<()> {
    let scheme = AtomicLevelScheme {
        gamma: 6.0,
        gamma21: 0.06,
        ..Default::default()
    };
    for omega_gamma in [2.35, 1.9, 1.6, 1.5] {
        let cfg = validate(
            scheme,
            BichromaticDrive::resonant(omega_gamma * 6.0, 20.0),
            ProbeField::new(0.6, 0.0),
            SolverSettings::default(),
            Units::MHz,
        )?;
        let trace = scan(&cfg, (cfg.from_mhz(-60.0), cfg.from_mhz(60.0)), 1201)?;
        let peaks = find_peaks(&trace, 0.05)?;
        let gaps: Vec<String> = peak_separations(&peaks)?
            .iter()
            .map(|&g| format!("{:.3}", cfg.to_mhz(g)))
            .collect();
        println!(
            "Ω_c = {omega_gamma:.2}Γ: {} peaks, separations [{}] MHz, max absorption {:.3}",
            peaks.len(),
            gaps.join(", "),
            trace.max_absorption()
        );
    }
    Ok(())
}
