//! Least-squares fits of the bichromatic model to measured probe traces.
//!
//! Traces are indexed by probe detuning in MHz. The model spectrum is the
//! Zeeman-averaged absorption `A` scaled into the measured signal:
//! `amplitude·A + baseline` for absorption traces and
//! `exp(−amplitude·A) + baseline` for transmission traces.

mod simplex;

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_response::probe_response_at;
use crate::model::{
    validate, AtomicLevelScheme, BichromaticDrive, Configuration, ProbeField, SolverMethod, SolverSettings, Units,
};
use crate::spectroscopy::{zeeman_average, ZeemanModel, ZeemanRule, DEFAULT_ZEEMAN_STEP};

pub use simplex::{Minimum, NelderMead};

/// Minimum number of samples in a trace.
pub const MIN_TRACE_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Absorption,
    Transmission,
}

impl FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "absorption" => Ok(TraceKind::Absorption),
            "transmission" => Ok(TraceKind::Transmission),
            other => Err(Error::InvalidInput(format!(
                "unknown trace kind '{other}' (expected absorption or transmission)"
            ))),
        }
    }
}

impl std::fmt::Display for TraceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TraceKind::Absorption => "absorption",
            TraceKind::Transmission => "transmission",
        })
    }
}

/// A measured (or synthetic) probe trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalTrace {
    /// Probe detunings in MHz, ascending.
    pub grid: Vec<f64>,
    pub signal: Vec<f64>,
    pub kind: TraceKind,
}

impl ExperimentalTrace {
    pub fn new(grid: Vec<f64>, signal: Vec<f64>, kind: TraceKind) -> Result<Self> {
        if grid.len() != signal.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} points but signal has {}",
                grid.len(),
                signal.len()
            )));
        }
        if grid.len() < MIN_TRACE_POINTS {
            return Err(Error::InvalidInput(format!(
                "trace has {} points, at least {MIN_TRACE_POINTS} required",
                grid.len()
            )));
        }
        if let Some(i) = grid.iter().chain(&signal).position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at index {}", i % grid.len())));
        }
        if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "grid not ascending at index {}: {} then {}",
                i + 1,
                grid[i],
                grid[i + 1]
            )));
        }
        Ok(Self { grid, signal, kind })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Read a trace CSV from disk. See [`parse_trace`] for the format.
pub fn load_trace(path: impl AsRef<Path>) -> Result<ExperimentalTrace> {
    parse_trace(&fs::read_to_string(path)?)
}

/// Parse a trace CSV:
///
/// ```text
/// # kind: transmission
/// delta_p_mhz,signal
/// -80,0.991
/// ...
/// ```
///
/// Other `#` lines are ignored. Errors carry the 1-based line number.
pub fn parse_trace(text: &str) -> Result<ExperimentalTrace> {
    let mut kind = None;
    for (i, line) in text.lines().enumerate() {
        let Some(comment) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        if let Some(value) = comment.trim().strip_prefix("kind:") {
            kind = Some(value.parse::<TraceKind>().map_err(|e| Error::Parse {
                line: i as u64 + 1,
                message: e.to_string(),
            })?);
        }
    }
    let kind = kind.ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing '# kind: absorption|transmission' line".into(),
    })?;

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header_line = reader.position().line();
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: header_line.max(1),
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["delta_p_mhz", "signal"] {
        return Err(Error::Parse {
            line: text
                .lines()
                .position(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
                .map_or(1, |p| p as u64 + 1),
            message: format!("expected header 'delta_p_mhz,signal', found '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let (mut grid, mut signal) = (Vec::new(), Vec::new());
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        let more = reader.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(line, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let field = |k: usize| -> Result<f64> {
            let raw = &record[k];
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("'{raw}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value '{raw}'"),
                });
            }
            Ok(v)
        };
        let (x, y) = (field(0)?, field(1)?);
        if let Some(&prev) = grid.last() {
            if x <= prev {
                return Err(Error::Parse {
                    line,
                    message: format!("detuning {x} does not exceed previous {prev}; grid must be ascending"),
                });
            }
        }
        grid.push(x);
        signal.push(y);
    }
    ExperimentalTrace::new(grid, signal, kind)
}

/// A fit parameter with its box constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounded {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub fixed: bool,
}

impl Bounded {
    pub fn free(value: f64, lower: f64, upper: f64) -> Self {
        Self {
            value,
            lower,
            upper,
            fixed: false,
        }
    }

    pub fn fixed(value: f64) -> Self {
        Self {
            value,
            lower: value,
            upper: value,
            fixed: true,
        }
    }

    fn is_free(&self) -> bool {
        !self.fixed && self.upper > self.lower
    }

    fn to_unit(&self, v: f64) -> f64 {
        (v - self.lower) / (self.upper - self.lower)
    }

    fn from_unit(&self, u: f64) -> f64 {
        (self.lower + u * (self.upper - self.lower)).clamp(self.lower, self.upper)
    }
}

pub const PARAMETER_NAMES: [&str; 6] = ["omega_c", "delta_c2", "gamma21", "zeeman_sigma", "amplitude", "baseline"];

/// Fit parameter vector. `omega_c` and `gamma21` are in units of Γ,
/// `delta_c2` and `zeeman_sigma` in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParameters {
    pub omega_c: Bounded,
    pub delta_c2: Bounded,
    pub gamma21: Bounded,
    pub zeeman_sigma: Bounded,
    pub amplitude: Bounded,
    pub baseline: Bounded,
}

impl FitParameters {
    /// All six parameters fixed at the given values.
    pub fn fixed(omega_c: f64, delta_c2: f64, gamma21: f64, zeeman_sigma: f64, amplitude: f64, baseline: f64) -> Self {
        Self {
            omega_c: Bounded::fixed(omega_c),
            delta_c2: Bounded::fixed(delta_c2),
            gamma21: Bounded::fixed(gamma21),
            zeeman_sigma: Bounded::fixed(zeeman_sigma),
            amplitude: Bounded::fixed(amplitude),
            baseline: Bounded::fixed(baseline),
        }
    }

    pub fn as_array(&self) -> [Bounded; 6] {
        [
            self.omega_c,
            self.delta_c2,
            self.gamma21,
            self.zeeman_sigma,
            self.amplitude,
            self.baseline,
        ]
    }

    fn from_array(p: [Bounded; 6]) -> Self {
        Self {
            omega_c: p[0],
            delta_c2: p[1],
            gamma21: p[2],
            zeeman_sigma: p[3],
            amplitude: p[4],
            baseline: p[5],
        }
    }

    pub fn values(&self) -> [f64; 6] {
        self.as_array().map(|b| b.value)
    }

    /// Copy with new values, keeping the bounds.
    pub fn with_values(&self, values: [f64; 6]) -> Self {
        let mut p = self.as_array();
        for (b, v) in p.iter_mut().zip(values) {
            b.value = v;
        }
        Self::from_array(p)
    }

    pub fn free_count(&self) -> usize {
        self.as_array().iter().filter(|b| b.is_free()).count()
    }

    /// Bounds ordered, value inside, physical parameters non-negative.
    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, b) in PARAMETER_NAMES.iter().zip(self.as_array()) {
            if ![b.value, b.lower, b.upper].iter().all(|v| v.is_finite()) {
                problems.push(format!("{name}: non-finite value or bound"));
            } else if !(b.lower <= b.value && b.value <= b.upper) {
                problems.push(format!("{name}: {} outside [{}, {}]", b.value, b.lower, b.upper));
            }
        }
        for (name, b) in [
            ("omega_c", self.omega_c),
            ("gamma21", self.gamma21),
            ("zeeman_sigma", self.zeeman_sigma),
        ] {
            if b.lower < 0.0 {
                problems.push(format!("{name}: lower bound {} must be non-negative", b.lower));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid fit parameters: {}", problems.join("; "))))
        }
    }
}

/// Everything the model needs besides the fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub solver: SolverSettings,
    /// Half the splitting of the two coupling components (δ), in MHz. Never fitted.
    pub half_separation_mhz: f64,
    pub gamma_mhz: f64,
    /// Probe Rabi frequency in units of Γ.
    pub omega_p: f64,
    pub zeeman_rule: ZeemanRule,
    /// Gauss–Hermite nodes.
    pub zeeman_points: usize,
    /// Trapezoid spacing in units of Γ.
    pub zeeman_step: f64,
    /// Evaluation budget of each simplex run.
    pub max_evaluations: usize,
    pub restarts: usize,
    pub tolerance: f64,
    /// Seed of the restart perturbations.
    pub seed: u64,
    /// Half-width of the restart perturbation in unit-box coordinates.
    pub restart_spread: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default().with_method(SolverMethod::ContinuedFraction),
            half_separation_mhz: 40.0,
            gamma_mhz: crate::model::DEFAULT_GAMMA_MHZ,
            omega_p: ProbeField::default().omega_p,
            zeeman_rule: ZeemanRule::Trapezoid,
            zeeman_points: 7,
            zeeman_step: DEFAULT_ZEEMAN_STEP,
            max_evaluations: 2000,
            restarts: 3,
            tolerance: 1e-8,
            seed: 0,
            restart_spread: 0.05,
        }
    }
}

impl FitSettings {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Configuration (in units of Γ) described by `theta`.
pub fn configuration_for(theta: &FitParameters, scheme: &AtomicLevelScheme, settings: &FitSettings) -> Result<Configuration> {
    let g = settings.gamma_mhz;
    let scheme = AtomicLevelScheme {
        gamma: g,
        gamma21: theta.gamma21.value * g,
        ..*scheme
    };
    let drive = BichromaticDrive {
        omega_c1: theta.omega_c.value * g,
        omega_c2: theta.omega_c.value * g,
        delta: settings.half_separation_mhz,
        delta_c2: theta.delta_c2.value,
    };
    let probe = ProbeField::new(settings.omega_p * g, 0.0);
    validate(scheme, drive, probe, settings.solver, Units::MHz)
}

/// Zeeman-averaged normalized absorption on `grid_mhz`.
pub fn model_absorption(
    theta: &FitParameters,
    grid_mhz: &[f64],
    scheme: &AtomicLevelScheme,
    settings: &FitSettings,
) -> Result<Vec<f64>> {
    let cfg = configuration_for(theta, scheme, settings)?;
    let g = settings.gamma_mhz;
    let zeeman = ZeemanModel {
        sigma: theta.zeeman_sigma.value / g,
        n_points: settings.zeeman_points,
        rule: settings.zeeman_rule,
        step: settings.zeeman_step,
    };
    // the averaging rules want an ascending grid
    let mut order: Vec<usize> = (0..grid_mhz.len()).collect();
    order.sort_by(|&i, &j| grid_mhz[i].total_cmp(&grid_mhz[j]));
    let grid: Vec<f64> = order.iter().map(|&i| grid_mhz[i] / g).collect();
    let trace = zeeman_average(&grid, &zeeman, |dp| {
        probe_response_at(&cfg, dp).map(|r| (r.absorption, r.dispersion))
    })
    .map_err(|e| Error::Fit(format!("model evaluation failed: {e}")))?;
    let mut out = vec![0.0; grid.len()];
    for (k, &i) in order.iter().enumerate() {
        out[i] = trace.absorption[k];
    }
    Ok(out)
}

/// Model signal on `grid_mhz` for a trace of the given kind.
pub fn model_signal(
    theta: &FitParameters,
    grid_mhz: &[f64],
    kind: TraceKind,
    scheme: &AtomicLevelScheme,
    settings: &FitSettings,
) -> Result<Vec<f64>> {
    let (amp, base) = (theta.amplitude.value, theta.baseline.value);
    let a = model_absorption(theta, grid_mhz, scheme, settings)?;
    Ok(match kind {
        TraceKind::Absorption => a.iter().map(|a| amp * a + base).collect(),
        TraceKind::Transmission => a.iter().map(|a| (-amp * a).exp() + base).collect(),
    })
}

/// `Σ_i (model_i − signal_i)²` over an arbitrary set of sample points.
pub fn residual_at(
    theta: &FitParameters,
    grid_mhz: &[f64],
    signal: &[f64],
    kind: TraceKind,
    scheme: &AtomicLevelScheme,
    settings: &FitSettings,
) -> Result<f64> {
    if grid_mhz.len() != signal.len() {
        return Err(Error::InvalidInput("grid and signal lengths differ".into()));
    }
    let model = model_signal(theta, grid_mhz, kind, scheme, settings)?;
    Ok(model.iter().zip(signal).map(|(m, s)| (m - s).powi(2)).sum())
}

/// Sum of squared deviations between the model and `trace`.
pub fn residual(
    theta: &FitParameters,
    trace: &ExperimentalTrace,
    scheme: &AtomicLevelScheme,
    settings: &FitSettings,
) -> Result<f64> {
    residual_at(theta, &trace.grid, &trace.signal, trace.kind, scheme, settings)
}

/// Synthetic trace from `theta`, optionally with additive Gaussian noise of
/// standard deviation `noise·max|signal|`.
pub fn synthetic_trace(
    theta: &FitParameters,
    grid_mhz: Vec<f64>,
    kind: TraceKind,
    scheme: &AtomicLevelScheme,
    settings: &FitSettings,
    noise: Option<(f64, u64)>,
) -> Result<ExperimentalTrace> {
    let mut signal = model_signal(theta, &grid_mhz, kind, scheme, settings)?;
    if let Some((level, seed)) = noise {
        let scale = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let normal = Normal::new(0.0, level * scale)
            .map_err(|e| Error::InvalidInput(format!("noise level {level}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut signal {
            *v += normal.sample(&mut rng);
        }
    }
    ExperimentalTrace::new(grid_mhz, signal, kind)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub residual: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub initial_residual: f64,
    pub free_parameters: Vec<String>,
    /// First entry is the descent from the initial point, the rest are restarts.
    pub runs: Vec<RunSummary>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: FitParameters,
    pub residual: f64,
    pub n_evaluations: usize,
    pub converged: bool,
    pub diagnostics: FitDiagnostics,
    pub settings: FitSettings,
}

/// Fit the free parameters of `initial` to `trace` by bounded Nelder–Mead
/// with seeded restarts.
pub fn fit(
    initial: &FitParameters,
    trace: &ExperimentalTrace,
    scheme: &AtomicLevelScheme,
    settings: &FitSettings,
) -> Result<FitResult> {
    initial.check()?;
    let initial_residual = residual(initial, trace, scheme, settings)?;
    let bounds = initial.as_array();
    let free: Vec<usize> = (0..6).filter(|&k| bounds[k].is_free()).collect();
    let free_names = free.iter().map(|&k| PARAMETER_NAMES[k].to_string()).collect();

    if free.is_empty() {
        return Ok(FitResult {
            parameters: *initial,
            residual: initial_residual,
            n_evaluations: 1,
            converged: true,
            diagnostics: FitDiagnostics {
                initial_residual,
                free_parameters: free_names,
                runs: Vec::new(),
                message: "no free parameters".into(),
            },
            settings: settings.clone(),
        });
    }

    let to_params = |u: &[f64]| {
        let mut values = initial.values();
        for (&k, &uk) in free.iter().zip(u) {
            values[k] = bounds[k].from_unit(uk);
        }
        initial.with_values(values)
    };
    let objective = |u: &[f64]| -> Result<f64> {
        Ok(residual(&to_params(u), trace, scheme, settings).unwrap_or(f64::INFINITY))
    };
    let optimizer = NelderMead {
        max_evaluations: settings.max_evaluations,
        tolerance: settings.tolerance,
        ..NelderMead::default()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut best_u: Vec<f64> = free.iter().map(|&k| bounds[k].to_unit(bounds[k].value)).collect();
    let mut best_value = initial_residual;
    let mut best_converged = false;
    let mut runs = Vec::new();
    let mut n_evaluations = 1;

    for run in 0..=settings.restarts {
        let start: Vec<f64> = if run == 0 {
            best_u.clone()
        } else {
            best_u
                .iter()
                .map(|u| (u + rng.random_range(-settings.restart_spread..=settings.restart_spread)).clamp(0.0, 1.0))
                .collect()
        };
        let m = optimizer.minimize(objective, &start)?;
        n_evaluations += m.evaluations;
        runs.push(RunSummary {
            residual: m.value,
            evaluations: m.evaluations,
            converged: m.converged,
        });
        if m.value < best_value {
            best_value = m.value;
            best_u = m.x;
            best_converged = m.converged;
        } else if m.value == best_value {
            best_converged |= m.converged;
        }
    }

    let improved = best_value < initial_residual || initial_residual == 0.0;
    let converged = improved && best_converged;
    let message = if !improved {
        "no run improved on the initial residual".to_string()
    } else if !best_converged {
        "evaluation budget exhausted before the simplex collapsed".to_string()
    } else {
        "converged".to_string()
    };
    Ok(FitResult {
        parameters: to_params(&best_u),
        residual: best_value,
        n_evaluations,
        converged,
        diagnostics: FitDiagnostics {
            initial_residual,
            free_parameters: free_names,
            runs,
            message,
        },
        settings: settings.clone(),
    })
}
