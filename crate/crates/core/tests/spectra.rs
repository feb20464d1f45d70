use bichromatic_eit::model::validate;
use bichromatic_eit::prelude::*;
use bichromatic_eit::spectroscopy::{scan_grid, uniform_grid, zeeman_scan, ZeemanRule};

fn rb(omega_gamma: f64, delta_mhz: f64) -> Configuration {
    validate(
        AtomicLevelScheme {
            gamma: 6.0,
            gamma21: 0.06,
            ..Default::default()
        },
        BichromaticDrive::resonant(omega_gamma * 6.0, delta_mhz),
        ProbeField::new(0.06, 0.0),
        SolverSettings::default().with_method(SolverMethod::ContinuedFraction),
        Units::MHz,
    )
    .unwrap()
}

#[test]
fn units_are_equivalent() {
    let mhz = rb(2.3, 40.0);
    let gamma = Configuration::new(
        AtomicLevelScheme::default(),
        BichromaticDrive::resonant(2.3, 40.0 / 6.0),
        ProbeField::default(),
        mhz.settings,
    )
    .unwrap();
    for dp in [-7.0, -1.2, 0.0, 3.3] {
        let a = probe_response_at(&mhz, dp).unwrap();
        let b = probe_response_at(&gamma, dp).unwrap();
        assert!((a.absorption - b.absorption).abs() < 1e-12);
        assert!((a.dispersion - b.dispersion).abs() < 1e-12);
    }
}

#[test]
fn zeeman_average_preserves_area_of_lorentzian() {
    let cfg = Configuration::new(
        AtomicLevelScheme::default(),
        BichromaticDrive::monochromatic(0.0, 0.0),
        ProbeField::default(),
        SolverSettings::default(),
    )
    .unwrap();
    let grid = uniform_grid(-60.0, 60.0, 12001);
    let sigma = 2.0 / 6.0;
    let bare = scan_grid(&cfg, &grid).unwrap();
    let broad = zeeman_scan(&cfg, &grid, &ZeemanModel::new(sigma, 7).unwrap()).unwrap();
    let area = |y: &[f64]| y.iter().sum::<f64>() * (grid[1] - grid[0]);
    assert!(broad.max_absorption() < bare.max_absorption());
    assert!((area(&broad.absorption) / area(&bare.absorption) - 1.0).abs() < 1e-2);

    let fine = zeeman_scan(&cfg, &grid, &ZeemanModel::trapezoid(sigma, 0.01).unwrap()).unwrap();

    // dense direct convolution at a few points
    let dense = uniform_grid(-8.0 * sigma, 8.0 * sigma, 4001);
    let h = dense[1] - dense[0];
    for (i, &x) in grid.iter().enumerate().step_by(1500) {
        let direct: f64 = dense
            .iter()
            .map(|&s| {
                let w = (-0.5 * (s / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                w * 1.0 / (1.0 + 4.0 * (x - s).powi(2))
            })
            .sum::<f64>()
            * h;
        assert!((broad.absorption[i] - direct).abs() < 1e-2 * direct, "x = {x}: {} vs {direct}", broad.absorption[i]);
        assert!((fine.absorption[i] - direct).abs() < 1e-6 * direct, "x = {x}: {} vs {direct}", fine.absorption[i]);
    }
}

#[test]
fn broadening_keeps_peak_positions() {
    let cfg = rb(2.3, 40.0);
    let grid: Vec<f64> = uniform_grid(-80.0, 80.0, 801).iter().map(|&x| cfg.from_mhz(x)).collect();
    let bare = find_peaks(&scan_grid(&cfg, &grid).unwrap(), 0.05).unwrap();
    let model = ZeemanModel::trapezoid(cfg.from_mhz(2.0), 0.01).unwrap();
    assert_eq!(model.rule, ZeemanRule::Trapezoid);
    let broad = find_peaks(&zeeman_scan(&cfg, &grid, &model).unwrap(), 0.05).unwrap();
    assert_eq!(bare.len(), 3);
    assert_eq!(broad.len(), 3);
    for (a, b) in bare.positions.iter().zip(&broad.positions) {
        assert!(cfg.to_mhz((a - b).abs()) < 1.0);
    }
}

#[test]
fn peak_spacing_independent_of_coupling() {
    let gaps = |omega: f64| {
        let cfg = rb(omega, 20.0);
        let trace = scan(&cfg, (cfg.from_mhz(-60.0), cfg.from_mhz(60.0)), 1201).unwrap();
        let peaks = find_peaks(&trace, 0.05).unwrap();
        peak_separations(&peaks).unwrap().into_iter().map(|g| cfg.to_mhz(g)).collect::<Vec<_>>()
    };
    let (strong, weak) = (gaps(2.35), gaps(1.5));
    assert_eq!(strong.len(), weak.len());
    for (a, b) in strong.iter().zip(&weak) {
        assert!((a - 20.0).abs() < 1.0 && (b - 20.0).abs() < 1.0 && (a - b).abs() < 1.0);
    }
}

#[test]
fn detuned_drive_is_asymmetric() {
    for dc2 in [1.34, 3.34, 5.7] {
        let cfg = Configuration::new(
            AtomicLevelScheme::default(),
            BichromaticDrive {
                delta_c2: dc2,
                ..BichromaticDrive::resonant(2.2, 3.35)
            },
            ProbeField::default(),
            SolverSettings::default(),
        )
        .unwrap();
        let trace = scan(&cfg, (-12.0, 12.0), 1201).unwrap();
        assert!(trace.asymmetry().unwrap() > 0.05 * trace.max_absorption(), "Δ_c2 = {dc2}");
    }
}
