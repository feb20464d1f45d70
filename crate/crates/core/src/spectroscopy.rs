//! Spectra over probe detuning and the features read off them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_response::probe_response_at;
use crate::model::Configuration;
use crate::quadrature::gauss_hermite;

/// Default prominence threshold as a fraction of the trace maximum.
pub const DEFAULT_PROMINENCE: f64 = 0.05;

/// Default finite-difference step for dispersion slopes (units of Γ).
pub const DEFAULT_SLOPE_STEP: f64 = 1e-3;

/// Absorption and dispersion sampled on an ascending detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTrace {
    pub grid: Vec<f64>,
    pub absorption: Vec<f64>,
    pub dispersion: Vec<f64>,
}

impl SpectrumTrace {
    pub fn new(grid: Vec<f64>, absorption: Vec<f64>, dispersion: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidInput("a trace needs at least two points".into()));
        }
        if absorption.len() != grid.len() || dispersion.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "trace arrays differ in length: grid {}, absorption {}, dispersion {}",
                grid.len(),
                absorption.len(),
                dispersion.len()
            )));
        }
        if let Some(k) = grid.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "grid not strictly ascending at index {}",
                k + 1
            )));
        }
        Ok(Self {
            grid,
            absorption,
            dispersion,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn max_absorption(&self) -> f64 {
        self.absorption.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same trace with every detuning multiplied by `factor` (unit change).
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    /// `max |A(Δ) − A(−Δ)| / max A`. The grid must be symmetric about zero.
    pub fn asymmetry(&self) -> Result<f64> {
        let n = self.len();
        let scale = self.grid.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for k in 0..n / 2 {
            if (self.grid[k] + self.grid[n - 1 - k]).abs() > 1e-9 * scale {
                return Err(Error::InvalidInput(
                    "asymmetry needs a grid symmetric about zero".into(),
                ));
            }
        }
        let worst = (0..n)
            .map(|k| (self.absorption[k] - self.absorption[n - 1 - k]).abs())
            .fold(0.0, f64::max);
        Ok(worst / self.max_absorption())
    }
}

/// `n` uniformly spaced points on `[lo, hi]`, exactly antisymmetric when
/// `lo == −hi`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    if n < 2 {
        return vec![mid; n];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|k| {
            let x = mid + half * (2.0 * k as f64 - m) / m;
            x.clamp(lo, hi)
        })
        .collect()
}

/// Evaluate the probe response on a uniform grid over `range`.
///
/// Grid points are solved in parallel; each is independent, so the result
/// does not depend on scheduling.
pub fn scan(cfg: &Configuration, range: (f64, f64), n_points: usize) -> Result<SpectrumTrace> {
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("scan range [{lo}, {hi}] is empty")));
    }
    if n_points < 2 {
        return Err(Error::InvalidInput("a scan needs at least two points".into()));
    }
    scan_grid(cfg, &uniform_grid(lo, hi, n_points))
}

pub fn scan_grid(cfg: &Configuration, grid: &[f64]) -> Result<SpectrumTrace> {
    let points: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&dp| probe_response_at(cfg, dp).map(|r| (r.absorption, r.dispersion)))
        .collect::<Result<_>>()?;
    let (absorption, dispersion) = points.into_iter().unzip();
    SpectrumTrace::new(grid.to_vec(), absorption, dispersion)
}

/// Local absorption maxima with their refined positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub positions: Vec<f64>,
    pub heights: Vec<f64>,
    pub prominences: Vec<f64>,
    /// Grid index of each peak sample.
    pub indices: Vec<usize>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Vertex of the parabola through three points: (position, value).
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (d0, d2) = (x[1] - x[0], x[1] - x[2]);
    let num = d0 * d0 * (y[1] - y[2]) - d2 * d2 * (y[1] - y[0]);
    let den = d0 * (y[1] - y[2]) - d2 * (y[1] - y[0]);
    if den == 0.0 {
        return (x[1], y[1]);
    }
    let xv = (x[1] - 0.5 * num / den).clamp(x[0], x[2]);
    // Lagrange form evaluated at the vertex
    let l0 = (xv - x[1]) * (xv - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]));
    let l1 = (xv - x[0]) * (xv - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]));
    let l2 = (xv - x[0]) * (xv - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]));
    (xv, l0 * y[0] + l1 * y[1] + l2 * y[2])
}

fn refine(grid: &[f64], values: &[f64], k: usize) -> (f64, f64) {
    if k == 0 || k + 1 >= grid.len() {
        return (grid[k], values[k]);
    }
    parabola_vertex(
        [grid[k - 1], grid[k], grid[k + 1]],
        [values[k - 1], values[k], values[k + 1]],
    )
}

/// Topographic prominence of the sample at `k`.
fn prominence(values: &[f64], k: usize) -> f64 {
    let peak = values[k];
    let mut left_min = peak;
    for &v in values[..k].iter().rev() {
        if v > peak {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = peak;
    for &v in &values[k + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

/// Interior local maxima of the absorption with prominence of at least
/// `threshold · max(absorption)`, refined by three-point parabolic
/// interpolation. Flat-topped maxima are reported at the plateau centre.
pub fn find_peaks(trace: &SpectrumTrace, threshold: f64) -> Result<PeakSet> {
    if trace.len() < 3 {
        return Err(Error::InvalidInput("peak finding needs at least three points".into()));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "prominence threshold {threshold} outside (0, 1]"
        )));
    }
    let a = &trace.absorption;
    let floor = threshold * trace.max_absorption();
    let mut out = PeakSet {
        positions: vec![],
        heights: vec![],
        prominences: vec![],
        indices: vec![],
    };

    let n = a.len();
    let mut i = 1;
    while i + 1 < n {
        if a[i - 1] < a[i] {
            let mut j = i;
            while j + 1 < n && a[j + 1] == a[i] {
                j += 1;
            }
            if j + 1 < n && a[j + 1] < a[i] {
                let k = (i + j) / 2;
                let prom = prominence(a, k);
                if prom >= floor {
                    let (pos, height) = if i == j {
                        refine(&trace.grid, a, k)
                    } else {
                        (0.5 * (trace.grid[i] + trace.grid[j]), a[k])
                    };
                    out.positions.push(pos);
                    out.heights.push(height);
                    out.prominences.push(prom);
                    out.indices.push(k);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    Ok(out)
}

/// Gaps between successive refined peak positions.
pub fn peak_separations(peaks: &PeakSet) -> Result<Vec<f64>> {
    if peaks.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "separations need at least two peaks, found {}",
            peaks.len()
        )));
    }
    Ok(peaks.positions.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Absorption minimum between two adjacent peaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransparencyWindow {
    pub position: f64,
    pub absorption: f64,
}

/// Minimum-absorption point between each adjacent pair of peaks, refined
/// parabolically.
pub fn transparency_minima(trace: &SpectrumTrace, peaks: &PeakSet) -> Result<Vec<TransparencyWindow>> {
    if trace.len() < 3 {
        return Err(Error::InvalidInput("need at least three points".into()));
    }
    if peaks.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "transparency windows need at least two peaks, found {}",
            peaks.len()
        )));
    }
    let a = &trace.absorption;
    let negated: Vec<f64> = a.iter().map(|v| -v).collect();
    Ok(peaks
        .indices
        .windows(2)
        .map(|w| {
            let k = (w[0]..=w[1])
                .min_by(|&p, &q| a[p].total_cmp(&a[q]))
                .expect("non-empty range");
            let (position, neg) = refine(&trace.grid, &negated, k);
            TransparencyWindow {
                position,
                absorption: -neg,
            }
        })
        .collect())
}

/// Centred finite-difference slope of the normalized dispersion at
/// `at_detuning`. Positive values mean normal dispersion (slow light).
pub fn dispersion_slope(cfg: &Configuration, at_detuning: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step {h} must be positive")));
    }
    let up = probe_response_at(cfg, at_detuning + h)?.dispersion;
    let down = probe_response_at(cfg, at_detuning - h)?.dispersion;
    Ok((up - down) / (2.0 * h))
}

/// How the Gaussian average over detuning shifts is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeemanRule {
    /// `n_points`-node Gauss–Hermite quadrature per grid point. Cheap, but
    /// aliases features narrower than the node spacing.
    #[default]
    GaussHermite,
    /// Trapezoid convolution against the response on an auxiliary uniform
    /// grid of spacing `step`, cut at ±6σ.
    Trapezoid,
}

/// Gaussian distribution of detuning shifts from unresolved Zeeman sublevels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeemanModel {
    /// Standard deviation of the shifts, in the same unit as the grid.
    pub sigma: f64,
    /// Quadrature size (odd), Gauss–Hermite rule only.
    #[serde(default = "default_zeeman_points")]
    pub n_points: usize,
    #[serde(default)]
    pub rule: ZeemanRule,
    /// Auxiliary grid spacing, trapezoid rule only.
    #[serde(default = "default_zeeman_step")]
    pub step: f64,
}

fn default_zeeman_points() -> usize {
    7
}

fn default_zeeman_step() -> f64 {
    DEFAULT_ZEEMAN_STEP
}

/// Default auxiliary spacing of the trapezoid rule (units of Γ). Resolves the
/// narrowest sideband resonances, whose widths are a few hundredths of Γ.
pub const DEFAULT_ZEEMAN_STEP: f64 = 0.01;

/// Half-width of the trapezoid kernel in units of σ.
const KERNEL_CUTOFF: f64 = 6.0;

impl Default for ZeemanModel {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            n_points: default_zeeman_points(),
            rule: ZeemanRule::GaussHermite,
            step: DEFAULT_ZEEMAN_STEP,
        }
    }
}

impl ZeemanModel {
    /// Gauss–Hermite rule with `n_points` nodes.
    pub fn new(sigma: f64, n_points: usize) -> Result<Self> {
        let model = Self {
            sigma,
            n_points,
            ..Self::default()
        };
        model.check()?;
        Ok(model)
    }

    /// Trapezoid rule with auxiliary spacing `step`.
    pub fn trapezoid(sigma: f64, step: f64) -> Result<Self> {
        let model = Self {
            sigma,
            rule: ZeemanRule::Trapezoid,
            step,
            ..Self::default()
        };
        model.check()?;
        Ok(model)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidInput(format!("Zeeman sigma {} must be non-negative", self.sigma)));
        }
        match self.rule {
            ZeemanRule::GaussHermite if self.n_points == 0 || self.n_points % 2 == 0 => Err(Error::InvalidInput(
                format!("Zeeman quadrature size {} must be odd", self.n_points),
            )),
            ZeemanRule::Trapezoid if !(self.step > 0.0 && self.step.is_finite()) => Err(Error::InvalidInput(
                format!("Zeeman step {} must be positive", self.step),
            )),
            _ => Ok(()),
        }
    }

    /// Gauss–Hermite shifts and weights.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        gauss_hermite(self.n_points, self.sigma)
    }

    /// Copy with a different width.
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }
}

/// Average `response` over Gaussian detuning shifts at every grid point.
///
/// `response` returns `(absorption, dispersion)` at one detuning. With
/// `sigma == 0` the response is evaluated once per point, unweighted.
pub fn zeeman_average<F>(grid: &[f64], model: &ZeemanModel, response: F) -> Result<SpectrumTrace>
where
    F: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    model.check()?;
    let points: Vec<(f64, f64)> = if model.sigma == 0.0 {
        grid.par_iter().map(|&x| response(x)).collect::<Result<_>>()?
    } else if model.rule == ZeemanRule::GaussHermite {
        let (shifts, weights) = model.nodes();
        grid.par_iter()
            .map(|&x| {
                let mut acc = (0.0, 0.0);
                for (s, w) in shifts.iter().zip(&weights) {
                    let (a, d) = response(x + s)?;
                    acc.0 += w * a;
                    acc.1 += w * d;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?
    } else {
        trapezoid_average(grid, model, &response)?
    };
    let (absorption, dispersion) = points.into_iter().unzip();
    SpectrumTrace::new(grid.to_vec(), absorption, dispersion)
}

fn trapezoid_average<F>(grid: &[f64], model: &ZeemanModel, response: &F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    let Some((&lo, &hi)) = grid.first().zip(grid.last()) else {
        return Ok(Vec::new());
    };
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("trapezoid Zeeman average needs an ascending grid".into()));
    }
    let reach = KERNEL_CUTOFF * model.sigma;
    let h = model.step.min(model.sigma / 4.0);
    let origin = lo - reach;
    let count = ((hi + reach - origin) / h).ceil() as usize + 1;
    let samples: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|j| response(origin + j as f64 * h))
        .collect::<Result<_>>()?;

    let inv = 1.0 / (2.0 * model.sigma * model.sigma);
    Ok(grid
        .par_iter()
        .map(|&x| {
            let first = ((x - reach - origin) / h).floor().max(0.0) as usize;
            let last = (((x + reach - origin) / h).ceil() as usize).min(count - 1);
            let (mut acc, mut norm) = ((0.0, 0.0), 0.0);
            // Gaussian weights by recurrence: w_{j+1} = w_j·r_j, r_{j+1} = r_j·c.
            let u = origin + first as f64 * h - x;
            let mut w = (-u * u * inv).exp();
            let mut r = (-(2.0 * u * h + h * h) * inv).exp();
            let c = (-2.0 * h * h * inv).exp();
            for &(a, d) in &samples[first..=last] {
                acc.0 += w * a;
                acc.1 += w * d;
                norm += w;
                w *= r;
                r *= c;
            }
            (acc.0 / norm, acc.1 / norm)
        })
        .collect())
}

/// Zeeman-averaged probe response of `cfg` on `grid` (all in units of Γ).
pub fn zeeman_scan(cfg: &Configuration, grid: &[f64], model: &ZeemanModel) -> Result<SpectrumTrace> {
    zeeman_average(grid, model, |dp| {
        probe_response_at(cfg, dp).map(|r| (r.absorption, r.dispersion))
    })
}

/// Beer–Lambert transmission `exp(−optical_depth · absorption)`.
pub fn transmission(trace: &SpectrumTrace, optical_depth: f64) -> Result<Vec<f64>> {
    if !(optical_depth >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "optical depth {optical_depth} must be non-negative"
        )));
    }
    Ok(trace
        .absorption
        .iter()
        .map(|a| (-optical_depth * a).exp())
        .collect())
}

/// Optical depth giving the bare-resonance absorption fraction `peak_absorption`.
pub fn optical_depth_for(peak_absorption: f64) -> f64 {
    -(1.0 - peak_absorption).ln()
}
