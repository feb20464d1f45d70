//! Absorption and dispersion of the moderate bichromatic drive
//! (Ω_c = 0.4Γ, 2δ = 1.4Γ): peaks, transparency windows and their slopes.
//!
//!     cargo run --release --example spectrum_fig2a -- [out_dir]

use std::time::Instant;

use bichromatic_eit::io::save_spectrum;
use bichromatic_eit::model::dressed_ladder;
use bichromatic_eit::plot::{LinePlot, Series};
use bichromatic_eit::prelude::*;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/spectrum_fig2a".into());
    let cfg = Configuration::new(
        AtomicLevelScheme::default(),
        BichromaticDrive::resonant(0.4, 0.7),
        ProbeField::default(),
        SolverSettings::default(),
    )?;

    let start = Instant::now();
    let trace = scan(&cfg, (-2.0, 2.0), 801)?;
    let elapsed = start.elapsed();

    let peaks = find_peaks(&trace, 0.05)?;
    println!("801-point scan in {:.1} ms", elapsed.as_secs_f64() * 1e3);
    println!("ladder m·δ:  {:?}", dressed_ladder(cfg.drive.delta, 1));
    println!("peaks (Γ):   {:?}", peaks.positions);
    println!("separations: {:?}", peak_separations(&peaks)?);
    for w in transparency_minima(&trace, &peaks)? {
        let slope = dispersion_slope(&cfg, w.position, 1e-3)?;
        println!(
            "window at {:+.4}Γ: absorption {:.4}, dispersion slope {:+.4}",
            w.position, w.absorption, slope
        );
    }

    std::fs::create_dir_all(&out)?;
    save_spectrum(format!("{out}/spectrum.csv"), &trace, &cfg, Units::Gamma)?;
    LinePlot::new("Ω_c = 0.4Γ, 2δ = 1.4Γ", "probe detuning (Γ)", "response", trace.grid.clone())
        .with(Series::solid("absorption", trace.absorption.clone()))
        .with(Series::dashed("dispersion", trace.dispersion.clone()))
        .save(format!("{out}/spectrum.svg"))?;
    println!("wrote {out}/spectrum.csv and spectrum.svg");
    Ok(())
}
