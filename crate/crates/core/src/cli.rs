//! Run configurations and the `bieit` subcommands.
//!
//! A run configuration is a JSON document; see `configs/SCHEMA.md`. The
//! bundled reproduction configs can be named instead of given as paths.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{self, FitParameters, FitResult, FitSettings};
use crate::io;
use crate::linear_response::probe_response_at;
use crate::model::{
    dressed_ladder, validate, AtomicLevelScheme, BichromaticDrive, Configuration, ProbeField, SolverMethod,
    SolverSettings, Units, DEFAULT_GAMMA_MHZ, WEAK_PROBE_LIMIT,
};
use crate::oracle::{oracle_a0, IntegrationSettings, StateDiagnostics};
use crate::plot::{LinePlot, Series};
use crate::spectroscopy::{
    dispersion_slope, find_peaks, scan_grid, transmission, transparency_minima, uniform_grid, zeeman_average,
    zeeman_scan, PeakSet, SpectrumTrace, ZeemanModel, ZeemanRule, DEFAULT_PROMINENCE, DEFAULT_SLOPE_STEP,
    DEFAULT_ZEEMAN_STEP,
};

/// Oracle checks are limited to this many detunings.
pub const MAX_ORACLE_POINTS: usize = 32;

/// Relative deviation the oracle check accepts.
pub const ORACLE_TOLERANCE: f64 = 1e-3;

const BUNDLED: &[(&str, &str)] = &[
    ("fig2a", include_str!("../configs/fig2a.json")),
    ("fig2b", include_str!("../configs/fig2b.json")),
    ("fig2c", include_str!("../configs/fig2c.json")),
    ("fig4", include_str!("../configs/fig4.json")),
    ("fig5a", include_str!("../configs/fig5a.json")),
    ("fig5b", include_str!("../configs/fig5b.json")),
    ("fig5c", include_str!("../configs/fig5c.json")),
    ("fig5d", include_str!("../configs/fig5d.json")),
    ("fig6a", include_str!("../configs/fig6a.json")),
    ("fig6b", include_str!("../configs/fig6b.json")),
    ("fig6c", include_str!("../configs/fig6c.json")),
];

/// Names of the bundled configs.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(name, _)| *name)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakConfig {
    /// Minimum prominence as a fraction of the trace maximum.
    pub prominence: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            prominence: DEFAULT_PROMINENCE,
        }
    }
}

/// Zeeman broadening, with `sigma` and `step` in the config's units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeemanConfig {
    pub sigma: f64,
    #[serde(default)]
    pub rule: ZeemanRule,
    #[serde(default)]
    pub n_points: Option<usize>,
    #[serde(default)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Explicit probe detunings (config units).
    pub detunings: Option<Vec<f64>>,
    /// Otherwise this many points evenly over [−2δ, 2δ] (or the scan range
    /// for a monochromatic drive). Defaults to 5.
    pub points: Option<usize>,
    /// Probe Rabi frequency override (config units).
    pub omega_p: Option<f64>,
    /// RK4 step bound (units of 1/Γ).
    pub dt: Option<f64>,
}

/// Fit section. Parameter units are fixed: `omega_c` and `gamma21` in Γ,
/// `delta_c2` and `zeeman_sigma` in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub parameters: FitParameters,
    #[serde(default)]
    pub max_evaluations: Option<usize>,
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub zeeman_rule: Option<ZeemanRule>,
    #[serde(default)]
    pub zeeman_points: Option<usize>,
    /// Trapezoid spacing in units of Γ.
    #[serde(default)]
    pub zeeman_step: Option<f64>,
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub description: String,
    pub units: Units,
    /// Γ in MHz, for Γ-unit configs. MHz configs take it from `scheme.gamma`.
    #[serde(default)]
    pub gamma_mhz: Option<f64>,
    pub scheme: AtomicLevelScheme,
    pub drive: BichromaticDrive,
    #[serde(default)]
    pub probe: ProbeField,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub zeeman: Option<ZeemanConfig>,
    pub scan: ScanConfig,
    #[serde(default)]
    pub peaks: PeakConfig,
    #[serde(default)]
    pub optical_depth: Option<f64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub fit: Option<FitConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    /// Bundled config by name, or a JSON file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some((_, text)) = BUNDLED.iter().find(|(name, _)| *name == name_or_path) {
            return Self::from_json(text);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::InvalidInput(format!(
                "'{name_or_path}' is neither a bundled config ({}) nor an existing file",
                bundled_names().collect::<Vec<_>>().join(", ")
            )));
        }
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Γ in MHz.
    pub fn gamma_mhz(&self) -> Result<f64> {
        match (self.units, self.gamma_mhz) {
            (Units::MHz, Some(g)) if g != self.scheme.gamma => Err(Error::InvalidInput(format!(
                "gamma_mhz = {g} contradicts scheme.gamma = {} in an MHz config",
                self.scheme.gamma
            ))),
            (Units::MHz, _) => Ok(self.scheme.gamma),
            (Units::Gamma, Some(g)) if g > 0.0 && g.is_finite() => Ok(g),
            (Units::Gamma, Some(g)) => Err(Error::InvalidInput(format!("gamma_mhz = {g} must be positive"))),
            (Units::Gamma, None) => Ok(DEFAULT_GAMMA_MHZ),
        }
    }

    /// Validated physics, in units of Γ.
    pub fn configuration(&self) -> Result<Configuration> {
        let g = self.gamma_mhz()?;
        Ok(validate(self.scheme, self.drive, self.probe, self.solver, self.units)?.with_gamma_mhz(g))
    }

    /// Scan grid in units of Γ.
    pub fn grid(&self, cfg: &Configuration) -> Result<Vec<f64>> {
        let ScanConfig { min, max, points } = self.scan;
        if !(min.is_finite() && max.is_finite() && min < max) || points < 3 {
            return Err(Error::InvalidInput(format!(
                "scan needs min < max and at least 3 points, got [{min}, {max}] with {points}"
            )));
        }
        Ok(uniform_grid(cfg.from_units(min, self.units), cfg.from_units(max, self.units), points))
    }

    /// Zeeman model in units of Γ, if broadening is configured.
    pub fn zeeman_model(&self, cfg: &Configuration) -> Result<Option<ZeemanModel>> {
        let Some(z) = self.zeeman else {
            return Ok(None);
        };
        let model = ZeemanModel {
            sigma: cfg.from_units(z.sigma, self.units),
            n_points: z.n_points.unwrap_or(ZeemanModel::default().n_points),
            rule: z.rule,
            step: z.step.map_or(DEFAULT_ZEEMAN_STEP, |s| cfg.from_units(s, self.units)),
        };
        model.check()?;
        Ok(Some(model))
    }

    /// Apply command-line overrides.
    pub fn with_options(mut self, opts: &Options) -> Self {
        if let Some(method) = opts.method {
            self.solver.method = method;
        }
        if opts.plot {
            self.output.plot = true;
        }
        self
    }

    fn set(&mut self, parameter: SweepParameter, value: f64) {
        match parameter {
            SweepParameter::OmegaC => {
                self.drive.omega_c1 = value;
                self.drive.omega_c2 = value;
            }
            SweepParameter::Delta => self.drive.delta = value,
            SweepParameter::DeltaC2 => self.drive.delta_c2 = value,
            SweepParameter::Gamma21 => self.scheme.gamma21 = value,
        }
    }
}

/// Command-line overrides shared by every command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Options {
    /// Detuning unit of the written outputs; defaults to the config's.
    pub units: Option<Units>,
    pub method: Option<SolverMethod>,
    pub plot: bool,
    pub seed: Option<u64>,
}

/// Absorption and dispersion on `grid` (units of Γ), Zeeman-averaged when
/// a model is given.
pub fn compute_spectrum(cfg: &Configuration, grid: &[f64], zeeman: Option<&ZeemanModel>) -> Result<SpectrumTrace> {
    match zeeman {
        Some(model) if model.sigma > 0.0 => zeeman_scan(cfg, grid, model),
        _ => scan_grid(cfg, grid),
    }
}

fn averaged_slope(cfg: &Configuration, at: f64, zeeman: Option<&ZeemanModel>) -> Result<f64> {
    let h = DEFAULT_SLOPE_STEP;
    match zeeman {
        Some(model) if model.sigma > 0.0 => {
            let t = zeeman_average(&[at - h, at + h], model, |dp| {
                probe_response_at(cfg, dp).map(|r| (r.absorption, r.dispersion))
            })?;
            Ok((t.dispersion[1] - t.dispersion[0]) / (2.0 * h))
        }
        _ => dispersion_slope(cfg, at, h),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakReport {
    pub position: f64,
    pub height: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub position: f64,
    pub absorption: f64,
    /// d(dispersion)/d(Δ_p) per output unit.
    pub dispersion_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub description: String,
    pub units: Units,
    pub gamma_mhz: f64,
    pub points: usize,
    pub max_absorption: f64,
    pub peaks: Vec<PeakReport>,
    pub separations: Vec<f64>,
    pub transparency_minima: Vec<WindowReport>,
    /// Dressed-ladder positions m·δ inside the scan range.
    pub ladder: Vec<f64>,
    pub asymmetry: Option<f64>,
    pub warnings: Vec<String>,
}

/// Locate peaks and windows on `trace` and express everything in `units`.
pub fn summarize(
    config: &RunConfig,
    cfg: &Configuration,
    trace: &SpectrumTrace,
    zeeman: Option<&ZeemanModel>,
    units: Units,
) -> Result<SpectrumSummary> {
    let peaks: PeakSet = find_peaks(trace, config.peaks.prominence)?;
    let to = |x: f64| cfg.to_units(x, units);
    let windows = if peaks.len() >= 2 {
        transparency_minima(trace, &peaks)?
    } else {
        Vec::new()
    };
    let minima = windows
        .iter()
        .map(|w| {
            Ok(WindowReport {
                position: to(w.position),
                absorption: w.absorption,
                dispersion_slope: averaged_slope(cfg, w.position, zeeman)? / to(1.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = (trace.grid[0], trace.grid[trace.len() - 1]);
    let ladder = if cfg.drive.delta > 0.0 {
        let m_max = (lo.abs().max(hi.abs()) / cfg.drive.delta).floor() as usize;
        dressed_ladder(cfg.drive.delta, m_max)
            .into_iter()
            .filter(|x| (lo..=hi).contains(x))
            .map(to)
            .collect()
    } else {
        vec![0.0]
    };
    let positions: Vec<f64> = peaks.positions.iter().map(|&x| to(x)).collect();
    Ok(SpectrumSummary {
        description: config.description.clone(),
        units,
        gamma_mhz: cfg.gamma_mhz,
        points: trace.len(),
        max_absorption: trace.max_absorption(),
        separations: positions.windows(2).map(|w| w[1] - w[0]).collect(),
        peaks: positions
            .iter()
            .zip(&peaks.heights)
            .zip(&peaks.prominences)
            .map(|((&position, &height), &prominence)| PeakReport {
                position,
                height,
                prominence,
            })
            .collect(),
        transparency_minima: minima,
        ladder,
        asymmetry: trace.asymmetry().ok(),
        warnings: cfg.warnings.clone(),
    })
}

fn spectrum_plot(trace: &SpectrumTrace, cfg: &Configuration, units: Units, title: &str) -> LinePlot {
    let x = trace.grid.iter().map(|&v| cfg.to_units(v, units)).collect();
    LinePlot::new(title, format!("probe detuning ({units})"), "response (bare resonance = 1)", x)
        .with(Series::solid("absorption", trace.absorption.clone()))
        .with(Series::dashed("dispersion", trace.dispersion.clone()))
}

/// Write `spectrum.csv`, `summary.json`, a re-ingestable `synthetic_trace.csv`
/// and, with an optical depth, `transmission.csv`; `spectrum.svg` on request.
pub fn cmd_spectrum(config: &RunConfig, opts: &Options, out: &Path) -> Result<SpectrumSummary> {
    let config = config.clone().with_options(opts);
    let cfg = config.configuration()?;
    let units = opts.units.unwrap_or(config.units);
    let grid = config.grid(&cfg)?;
    let zeeman = config.zeeman_model(&cfg)?;
    let trace = compute_spectrum(&cfg, &grid, zeeman.as_ref())?;
    let summary = summarize(&config, &cfg, &trace, zeeman.as_ref(), units)?;

    fs::create_dir_all(out)?;
    io::save_spectrum(out.join("spectrum.csv"), &trace, &cfg, units)?;
    io::save_json(out.join("summary.json"), &summary)?;
    let grid_mhz: Vec<f64> = trace.grid.iter().map(|&x| cfg.to_mhz(x)).collect();
    let synthetic = match config.optical_depth {
        Some(od) => {
            let t = transmission(&trace, od)?;
            io::save_rows(out.join("transmission.csv"), &["delta_p", "transmission"], &[
                &trace.grid.iter().map(|&x| cfg.to_units(x, units)).collect::<Vec<_>>(),
                &t,
            ])?;
            fitting::ExperimentalTrace::new(grid_mhz, t, fitting::TraceKind::Transmission)?
        }
        None => fitting::ExperimentalTrace::new(grid_mhz, trace.absorption.clone(), fitting::TraceKind::Absorption)?,
    };
    io::save_trace(out.join("synthetic_trace.csv"), &synthetic)?;
    if config.output.plot {
        let title = if config.description.is_empty() { "probe spectrum" } else { &config.description };
        spectrum_plot(&trace, &cfg, units, title).save(out.join("spectrum.svg"))?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OraclePoint {
    pub delta_p: f64,
    pub floquet: ComplexValue,
    pub oracle: ComplexValue,
    pub relative_deviation: f64,
    pub periods: usize,
    pub diagnostics: StateDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub units: Units,
    pub omega_p: f64,
    pub tolerance: f64,
    pub points: Vec<OraclePoint>,
    pub max_deviation: f64,
    pub pass: bool,
    /// Set when the probe is outside the weak-probe regime or any deviation
    /// exceeds the tolerance: the full dynamics is then visibly nonlinear.
    pub nonlinearity_flag: bool,
}

/// Probe detunings (config units) for an oracle check.
pub fn oracle_detunings(config: &RunConfig, cfg: &Configuration) -> Result<Vec<f64>> {
    if let Some(d) = &config.oracle.detunings {
        return Ok(d.clone());
    }
    let n = config.oracle.points.unwrap_or(5);
    let half = if cfg.drive.delta > 0.0 {
        2.0 * cfg.drive.delta
    } else {
        0.5 * (cfg.from_units(config.scan.max, config.units) - cfg.from_units(config.scan.min, config.units))
    };
    let lo = cfg.to_units(-half, config.units);
    let hi = cfg.to_units(half, config.units);
    Ok(if n == 1 { vec![0.0] } else { uniform_grid(lo, hi, n) })
}

/// Compare the linear-response a_0 with the master-equation steady state at
/// each detuning and write `oracle_report.json`.
pub fn cmd_oracle_check(config: &RunConfig, detunings: Option<&[f64]>, opts: &Options, out: &Path) -> Result<OracleReport> {
    let mut config = config.clone().with_options(opts);
    if let Some(omega_p) = config.oracle.omega_p {
        config.probe.omega_p = omega_p;
    }
    let cfg = config.configuration()?;
    let points = match detunings {
        Some(d) => d.to_vec(),
        None => oracle_detunings(&config, &cfg)?,
    };
    if points.is_empty() || points.len() > MAX_ORACLE_POINTS {
        return Err(Error::InvalidInput(format!(
            "oracle check takes 1 to {MAX_ORACLE_POINTS} detunings, got {}",
            points.len()
        )));
    }
    let units = opts.units.unwrap_or(config.units);

    let mut rows = Vec::with_capacity(points.len());
    for &d in &points {
        let dp = cfg.from_units(d, config.units);
        let floquet = probe_response_at(&cfg, dp)?.a0;
        let at = cfg.at_detuning(dp);
        let mut settings = IntegrationSettings::for_config(&at);
        if let Some(dt) = config.oracle.dt {
            settings = settings.with_dt(dt);
        }
        let (oracle, traj) = oracle_a0(&at, &settings)?;
        rows.push(OraclePoint {
            delta_p: cfg.to_units(dp, units),
            floquet: floquet.into(),
            oracle: oracle.into(),
            relative_deviation: (floquet - oracle).norm() / oracle.norm(),
            periods: traj.periods,
            diagnostics: traj.diagnostics,
        });
    }
    let max_deviation = rows.iter().map(|r| r.relative_deviation).fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.relative_deviation < ORACLE_TOLERANCE);
    let report = OracleReport {
        units,
        omega_p: cfg.probe.omega_p,
        tolerance: ORACLE_TOLERANCE,
        points: rows,
        max_deviation,
        pass,
        nonlinearity_flag: cfg.probe.omega_p >= WEAK_PROBE_LIMIT || !pass,
    };
    fs::create_dir_all(out)?;
    io::save_json(out.join("oracle_report.json"), &report)?;
    Ok(report)
}

/// Fit settings implied by a run config.
pub fn fit_settings(config: &RunConfig, opts: &Options) -> Result<(FitSettings, FitParameters)> {
    let fit = config
        .fit
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("config has no 'fit' section".into()))?;
    let cfg = config.configuration()?;
    let mut settings = FitSettings {
        half_separation_mhz: cfg.to_mhz(cfg.drive.delta),
        gamma_mhz: cfg.gamma_mhz,
        omega_p: cfg.probe.omega_p,
        ..FitSettings::default()
    };
    if let Some(method) = opts.method {
        settings.solver.method = method;
    }
    if let Some(v) = fit.max_evaluations {
        settings.max_evaluations = v;
    }
    if let Some(v) = fit.restarts {
        settings.restarts = v;
    }
    if let Some(v) = fit.tolerance {
        settings.tolerance = v;
    }
    if let Some(v) = opts.seed.or(fit.seed) {
        settings.seed = v;
    }
    if let Some(v) = fit.zeeman_rule {
        settings.zeeman_rule = v;
    }
    if let Some(v) = fit.zeeman_points {
        settings.zeeman_points = v;
    }
    if let Some(v) = fit.zeeman_step {
        settings.zeeman_step = v;
    }
    Ok((settings, fit.parameters))
}

/// Fit the trace at `trace_path`; writes `fit.json` and `overlay.csv`.
pub fn cmd_fit(config: &RunConfig, trace_path: &Path, opts: &Options, out: &Path) -> Result<FitResult> {
    let config = config.clone().with_options(opts);
    let trace = fitting::load_trace(trace_path)?;
    let (settings, initial) = fit_settings(&config, opts)?;
    let scheme = config.configuration()?.scheme;
    let result = fitting::fit(&initial, &trace, &scheme, &settings)?;
    let model = fitting::model_signal(&result.parameters, &trace.grid, trace.kind, &scheme, &settings)?;

    fs::create_dir_all(out)?;
    io::save_json(out.join("fit.json"), &result)?;
    io::save_overlay(out.join("overlay.csv"), &trace.grid, &trace.signal, &model)?;
    if config.output.plot {
        LinePlot::new("fit", "probe detuning (MHz)", trace.kind.to_string(), trace.grid.clone())
            .with(Series::solid("data", trace.signal.clone()))
            .with(Series::dashed("model", model))
            .save(out.join("fit.svg"))?;
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepParameter {
    OmegaC,
    Delta,
    DeltaC2,
    Gamma21,
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParameter::OmegaC => "omega_c",
            SweepParameter::Delta => "delta",
            SweepParameter::DeltaC2 => "delta_c2",
            SweepParameter::Gamma21 => "gamma21",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub file: String,
    pub peak_count: usize,
    pub peak_positions: Vec<f64>,
    pub separations: Vec<f64>,
    pub asymmetry: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepIndex {
    pub parameter: SweepParameter,
    pub units: Units,
    pub values: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    pub complete: bool,
    pub error: Option<String>,
}

/// One spectrum per value of `parameter` (config units) plus `index.json`.
/// A failure leaves the traces written so far and an index marked incomplete.
pub fn cmd_sweep(
    config: &RunConfig,
    parameter: SweepParameter,
    values: &[f64],
    opts: &Options,
    out: &Path,
) -> Result<SweepIndex> {
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()));
    }
    let config = config.clone().with_options(opts);
    let units = opts.units.unwrap_or(config.units);
    fs::create_dir_all(out)?;
    let mut index = SweepIndex {
        parameter,
        units,
        values: values.to_vec(),
        entries: Vec::new(),
        complete: false,
        error: None,
    };
    for (i, &value) in values.iter().enumerate() {
        match sweep_point(&config, parameter, value, i, units, out) {
            Ok(entry) => index.entries.push(entry),
            Err(e) => {
                index.error = Some(format!("{parameter} = {value}: {e}"));
                io::save_json(out.join("index.json"), &index)?;
                return Err(e);
            }
        }
    }
    index.complete = true;
    io::save_json(out.join("index.json"), &index)?;
    Ok(index)
}

fn sweep_point(
    config: &RunConfig,
    parameter: SweepParameter,
    value: f64,
    i: usize,
    units: Units,
    out: &Path,
) -> Result<SweepEntry> {
    let mut point = config.clone();
    point.set(parameter, value);
    let cfg = point.configuration()?;
    let grid = point.grid(&cfg)?;
    let zeeman = point.zeeman_model(&cfg)?;
    let trace = compute_spectrum(&cfg, &grid, zeeman.as_ref())?;
    let peaks = find_peaks(&trace, point.peaks.prominence)?;
    let file = format!("{parameter}_{i:02}.csv");
    io::save_spectrum(out.join(&file), &trace, &cfg, units)?;
    let positions: Vec<f64> = peaks.positions.iter().map(|&x| cfg.to_units(x, units)).collect();
    Ok(SweepEntry {
        value,
        file,
        peak_count: peaks.len(),
        separations: positions.windows(2).map(|w| w[1] - w[0]).collect(),
        peak_positions: positions,
        asymmetry: trace.asymmetry().ok(),
    })
}

/// Process exit code for an error: 1 validation, 2 solver, 3 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_) | Error::InvalidInput(_) | Error::Parse { .. } | Error::Json(_) => 1,
        Error::Io(_) | Error::Csv(_) => 3,
        Error::Singular { .. }
        | Error::ContinuedFractionDiverged { .. }
        | Error::TruncationDiverged { .. }
        | Error::AtDetuning { .. }
        | Error::OracleNotSteady { .. }
        | Error::HarmonicOutOfRange { .. }
        | Error::Fit(_) => 2,
    }
}

#[derive(Debug, Parser)]
#[command(name = "bieit", version, about = "Probe spectra of a Λ atom under bichromatic coupling")]
pub struct Cli {
    /// Bundled config name or path to a JSON config.
    #[arg(long, global = true, default_value = "fig2a")]
    pub config: String,
    /// Output directory (default: the config's output.dir, else out/<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Detuning unit of the outputs.
    #[arg(long, global = true, value_parser = parse_units)]
    pub units: Option<Units>,
    /// Harmonic solver.
    #[arg(long, global = true, value_parser = parse_method)]
    pub method: Option<SolverMethod>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plot: bool,
    /// Seed for the fit restarts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_units(s: &str) -> std::result::Result<Units, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<SolverMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Absorption/dispersion scan with peak and window summary.
    Spectrum,
    /// Cross-check the linear response against the master equation.
    OracleCheck {
        /// Comma-separated probe detunings in config units.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        detunings: Option<Vec<f64>>,
    },
    /// Fit the model to a measured trace.
    Fit {
        #[arg(long)]
        trace: PathBuf,
    },
    /// One spectrum per parameter value.
    Sweep {
        #[arg(long, value_enum)]
        parameter: SweepParameter,
        /// Comma-separated values in config units.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 0..)]
        values: Vec<f64>,
    },
    /// List the bundled configs.
    Configs,
}

impl Cli {
    fn options(&self) -> Options {
        Options {
            units: self.units,
            method: self.method,
            plot: self.plot,
            seed: self.seed,
        }
    }

    fn out_dir(&self, config: &RunConfig, command: &str) -> PathBuf {
        self.out
            .clone()
            .or_else(|| config.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(command))
    }
}

/// Parse `args`, run the command, report on stdout/stderr, return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    if let Command::Configs = cli.command {
        for name in bundled_names() {
            let c = RunConfig::load(name)?;
            println!("{name:8} {}", c.description);
        }
        return Ok(0);
    }
    let config = RunConfig::load(&cli.config)?;
    let opts = cli.options();
    match &cli.command {
        Command::Spectrum => {
            let out = cli.out_dir(&config, "spectrum");
            let summary = cmd_spectrum(&config, &opts, &out)?;
            let positions: Vec<String> = summary.peaks.iter().map(|p| format!("{:.4}", p.position)).collect();
            println!(
                "{} peaks at [{}] {}; outputs in {}",
                summary.peaks.len(),
                positions.join(", "),
                summary.units,
                out.display()
            );
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            Ok(0)
        }
        Command::OracleCheck { detunings } => {
            let out = cli.out_dir(&config, "oracle");
            let report = cmd_oracle_check(&config, detunings.as_deref(), &opts, &out)?;
            for p in &report.points {
                println!("Δp = {:>10.4} {}: relative deviation {:.3e}", p.delta_p, report.units, p.relative_deviation);
            }
            println!(
                "max deviation {:.3e} (tolerance {:e}): {}",
                report.max_deviation,
                report.tolerance,
                if report.pass { "pass" } else { "FAIL" }
            );
            if report.nonlinearity_flag {
                eprintln!("note: probe nonlinearity visible at Ω_p = {}Γ", report.omega_p);
            }
            Ok(if report.pass { 0 } else { 2 })
        }
        Command::Fit { trace } => {
            let out = cli.out_dir(&config, "fit");
            let result = cmd_fit(&config, trace, &opts, &out)?;
            let v = result.parameters.values();
            println!(
                "omega_c = {:.5}Γ, delta_c2 = {:.4} MHz, gamma21 = {:.5}Γ, zeeman_sigma = {:.4} MHz, amplitude = {:.5}, baseline = {:.5}",
                v[0], v[1], v[2], v[3], v[4], v[5]
            );
            println!(
                "residual {:.4e} after {} evaluations, converged: {}",
                result.residual, result.n_evaluations, result.converged
            );
            Ok(0)
        }
        Command::Sweep { parameter, values } => {
            let out = cli.out_dir(&config, "sweep");
            let index = cmd_sweep(&config, *parameter, values, &opts, &out)?;
            for e in &index.entries {
                println!("{parameter} = {}: {} peaks", e.value, e.peak_count);
            }
            Ok(0)
        }
        Command::Configs => unreachable!("handled above"),
    }
}
