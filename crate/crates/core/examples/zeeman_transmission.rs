//! Zeeman-broadened absorption at 2δ = 80 MHz and the transmitted intensity
//! of a cloud whose bare-resonance absorption is 30%.
//!
//!     cargo run --release --example zeeman_transmission -- [sigma_mhz]

use bichromatic_eit::model::validate;
use bichromatic_eit::prelude::*;
use bichromatic_eit::spectroscopy::{optical_depth_for, uniform_grid, zeeman_scan};

fn main() -> Result<()> {
    let sigma_mhz: f64 = std::env::args().nth(1).map_or(2.0, |s| s.parse().expect("sigma"));
    let cfg = validate(
        AtomicLevelScheme {
            gamma: 6.0,
            gamma21: 0.06,
            ..Default::default()
        },
        BichromaticDrive::resonant(13.8, 40.0),
        ProbeField::new(0.06, 0.0),
        SolverSettings::default().with_method(SolverMethod::ContinuedFraction),
        Units::MHz,
    )?;
    let grid: Vec<f64> = uniform_grid(-80.0, 80.0, 801).iter().map(|&x| cfg.from_mhz(x)).collect();

    let bare = bichromatic_eit::spectroscopy::scan_grid(&cfg, &grid)?;
    let rule = ZeemanModel::trapezoid(cfg.from_mhz(sigma_mhz), 0.01)?;
    let broadened = zeeman_scan(&cfg, &grid, &rule)?;
    for (name, trace) in [("unbroadened", &bare), ("broadened", &broadened)] {
        let peaks = find_peaks(trace, 0.05)?;
        let mhz: Vec<String> = peaks.positions.iter().map(|&x| format!("{:.2}", cfg.to_mhz(x))).collect();
        println!("{name:>12}: {} peaks at [{}] MHz, max absorption {:.3}", peaks.len(), mhz.join(", "), trace.max_absorption());
    }

    let od = optical_depth_for(0.3);
    let t = transmission(&broadened, od)?;
    let min = t.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("optical depth {od:.4} (30% absorption on bare resonance): minimum transmission {min:.4}");
    Ok(())
}
