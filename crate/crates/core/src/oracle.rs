//! Time-domain ground truth: the full three-level master equation integrated
//! with fixed-step RK4 until its stroboscopic map is stationary.
//!
//! The Hamiltonian lives in a doubled rotating frame (probe frame on 3–1,
//! mean coupling frame on 3–2):
//!
//! ```text
//! H = −Δ_p|3⟩⟨3| − (Δ_p − Δ_c)|2⟩⟨2| − [(Ω_p/2)|3⟩⟨1| + (Ω_eff(t)/2)|3⟩⟨2| + h.c.]
//! Ω_eff(t) = Ω_c1 e^{−iδt} + Ω_c2 e^{+iδt}
//! ```
//!
//! In this frame ρ31 and ρ21 coincide with the `a` and `b` coherences of
//! [`crate::linear_response`]. |3⟩ decays at Γ and refills |1⟩ and |2⟩ with
//! the scheme's branching fractions; the ground coherence is dephased by
//! the Lindblad operator √(2γ21)|2⟩⟨2|.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Configuration;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// 3×3 density matrix over {|1⟩, |2⟩, |3⟩}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub Matrix3<C>);

impl DensityMatrix {
    /// The projector |k⟩⟨k| (k = 1, 2, 3).
    pub fn pure(level: usize) -> Self {
        assert!((1..=3).contains(&level), "level must be 1, 2 or 3");
        let mut m = Matrix3::zeros();
        m[(level - 1, level - 1)] = C::new(1.0, 0.0);
        Self(m)
    }

    /// ρ_ij with 1-based level indices.
    pub fn element(&self, i: usize, j: usize) -> C {
        self.0[(i - 1, j - 1)]
    }

    pub fn trace(&self) -> C {
        self.0.trace()
    }

    /// max |ρ − ρ†|.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.0 - self.0.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * C::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.min()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Right-hand side of the master equation for one configuration.
#[derive(Debug, Clone, Copy)]
pub struct MasterEquation {
    gamma: f64,
    branch_31: f64,
    branch_32: f64,
    gamma21: f64,
    omega_c1: f64,
    omega_c2: f64,
    omega_p: f64,
    delta: f64,
    delta_c: f64,
    delta_p: f64,
}

impl MasterEquation {
    pub fn new(cfg: &Configuration) -> Self {
        Self {
            gamma: cfg.scheme.gamma,
            branch_31: cfg.scheme.branch_31,
            branch_32: cfg.scheme.branch_32,
            gamma21: cfg.scheme.gamma21,
            omega_c1: cfg.drive.omega_c1,
            omega_c2: cfg.drive.omega_c2,
            omega_p: cfg.probe.omega_p,
            delta: cfg.drive.delta,
            delta_c: cfg.drive.average_detuning(),
            delta_p: cfg.probe.delta_p,
        }
    }

    /// Same equation with a different probe Rabi frequency (zero allowed).
    pub fn with_probe_rabi(mut self, omega_p: f64) -> Self {
        self.omega_p = omega_p;
        self
    }

    pub fn hamiltonian(&self, t: f64) -> Matrix3<C> {
        let phase = C::from_polar(1.0, -self.delta * t);
        let omega_eff = phase * self.omega_c1 + phase.conj() * self.omega_c2;
        let probe = C::new(-self.omega_p / 2.0, 0.0);
        let coupling = -omega_eff / 2.0;
        Matrix3::new(
            ZERO,
            ZERO,
            probe,
            ZERO,
            C::new(-(self.delta_p - self.delta_c), 0.0),
            coupling.conj(),
            probe,
            coupling,
            C::new(-self.delta_p, 0.0),
        )
    }

    /// dρ/dt = −i[H(t), ρ] + D[ρ].
    pub fn derivative(&self, rho: &Matrix3<C>, t: f64) -> Matrix3<C> {
        let h = self.hamiltonian(t);
        let mut out = (h * rho - rho * h) * (-I);

        // Decay of |3⟩ at total rate Γ: −(Γ/2){|3⟩⟨3|, ρ}.
        let half = self.gamma / 2.0;
        for k in 0..3 {
            out[(2, k)] -= rho[(2, k)] * half;
            out[(k, 2)] -= rho[(k, 2)] * half;
        }
        let rho33 = rho[(2, 2)];
        out[(0, 0)] += rho33 * (self.branch_31 * self.gamma);
        out[(1, 1)] += rho33 * (self.branch_32 * self.gamma);

        // Dephasing of |2⟩ against |1⟩ and |3⟩.
        for k in [0, 2] {
            out[(1, k)] -= rho[(1, k)] * self.gamma21;
            out[(k, 1)] -= rho[(k, 1)] * self.gamma21;
        }
        out
    }

    fn rk4(&self, rho: &Matrix3<C>, t: f64, dt: f64) -> Matrix3<C> {
        let h = C::new(dt, 0.0);
        let half = C::new(dt / 2.0, 0.0);
        let k1 = self.derivative(rho, t);
        let k2 = self.derivative(&(rho + k1 * half), t + dt / 2.0);
        let k3 = self.derivative(&(rho + k2 * half), t + dt / 2.0);
        let k4 = self.derivative(&(rho + k3 * h), t + dt);
        rho + (k1 + (k2 + k3) * C::new(2.0, 0.0) + k4) * C::new(dt / 6.0, 0.0)
    }

    /// Largest rate in the problem, which bounds the stable step.
    pub fn fastest_rate(&self) -> f64 {
        [
            self.gamma,
            self.omega_c1,
            self.omega_c2,
            self.delta_p.abs(),
            self.delta_c.abs(),
            self.delta,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Drive period 2π/δ, or 2π/Γ for a single-frequency coupling.
    pub fn period(&self) -> f64 {
        if self.delta > 0.0 {
            TAU / self.delta
        } else {
            TAU / self.gamma
        }
    }

    fn slowest_relaxation(&self) -> f64 {
        if self.gamma21 > 0.0 {
            self.gamma.min(self.gamma21)
        } else {
            self.gamma
        }
    }
}

/// `dρ/dt` at time `t` for the configuration `cfg`.
pub fn rho_derivative(rho: &DensityMatrix, t: f64, cfg: &Configuration) -> DensityMatrix {
    DensityMatrix(MasterEquation::new(cfg).derivative(&rho.0, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrationSettings {
    /// Upper bound on the RK4 step (units of 1/Γ). The step actually used
    /// divides the sampling interval evenly.
    pub dt: f64,
    pub settle_periods: usize,
    /// Maximum element change of the stroboscopic state over one period.
    pub steady_tol: f64,
    pub samples_per_period: usize,
    pub max_periods: usize,
}

impl IntegrationSettings {
    /// Largest admissible step for `cfg`: 0.01 over the fastest rate.
    pub fn max_dt(cfg: &Configuration) -> f64 {
        0.01 / MasterEquation::new(cfg).fastest_rate()
    }

    pub fn for_config(cfg: &Configuration) -> Self {
        Self {
            dt: Self::max_dt(cfg),
            settle_periods: 10,
            steady_tol: 1e-12,
            samples_per_period: 64,
            max_periods: 10_000,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    fn check(&self, cfg: &Configuration) -> Result<()> {
        let limit = Self::max_dt(cfg);
        if !(self.dt > 0.0 && self.dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::InvalidInput(format!(
                "dt = {} must lie in (0, {limit}]",
                self.dt
            )));
        }
        if self.samples_per_period < 64 {
            return Err(Error::InvalidInput(format!(
                "samples_per_period = {} must be at least 64",
                self.samples_per_period
            )));
        }
        if !(self.steady_tol > 0.0) {
            return Err(Error::InvalidInput("steady_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Extremes of the state-validity measures seen along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateDiagnostics {
    pub max_trace_deviation: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    fn new() -> Self {
        Self {
            max_trace_deviation: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }

    fn observe_cheap(&mut self, rho: &DensityMatrix, trace_target: f64) {
        self.max_trace_deviation = self
            .max_trace_deviation
            .max((rho.trace() - trace_target).norm());
        self.max_hermiticity_error = self.max_hermiticity_error.max(rho.hermiticity_error());
    }

    fn observe(&mut self, rho: &DensityMatrix, trace_target: f64) {
        self.observe_cheap(rho, trace_target);
        self.min_eigenvalue = self.min_eigenvalue.min(rho.min_eigenvalue());
    }
}

/// States sampled uniformly over the final drive period.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub period: f64,
    pub dt: f64,
    pub periods: usize,
    pub stroboscopic_residual: f64,
    pub diagnostics: StateDiagnostics,
}

impl Trajectory {
    pub fn samples_per_period(&self) -> usize {
        self.states.len()
    }
}

/// Integrate from `rho0` until the period-T map is stationary, then return
/// one period of uniformly spaced samples.
///
/// Stops once at least `settle_periods` periods and `20/min(Γ, γ21)` time
/// have elapsed and successive stroboscopic states differ by less than
/// `steady_tol`.
pub fn integrate_to_periodic_steady_state(
    cfg: &Configuration,
    rho0: DensityMatrix,
    settings: &IntegrationSettings,
) -> Result<Trajectory> {
    settings.check(cfg)?;
    let eq = MasterEquation::new(cfg);
    let period = eq.period();
    let samples = settings.samples_per_period;
    let sample_dt = period / samples as f64;
    let substeps = (sample_dt / settings.dt).ceil().max(1.0) as usize;
    let dt = sample_dt / substeps as f64;
    let steps_per_period = samples * substeps;
    let min_time = 20.0 / eq.slowest_relaxation();
    let trace_target = rho0.trace().re;

    let mut diagnostics = StateDiagnostics::new();
    diagnostics.observe(&rho0, trace_target);

    let mut rho = rho0.0;
    let mut periods = 0usize;
    let residual = loop {
        let start = DensityMatrix(rho);
        for step in 0..steps_per_period {
            let t = (periods * steps_per_period + step) as f64 * dt;
            rho = eq.rk4(&rho, t, dt);
            if (step + 1) % substeps == 0 {
                diagnostics.observe_cheap(&DensityMatrix(rho), trace_target);
            }
        }
        periods += 1;
        let end = DensityMatrix(rho);
        diagnostics.observe(&end, trace_target);
        let residual = end.max_abs_diff(&start);

        let elapsed = periods as f64 * period;
        if periods >= settings.settle_periods && elapsed >= min_time && residual < settings.steady_tol {
            break residual;
        }
        if periods >= settings.max_periods {
            return Err(Error::OracleNotSteady { periods, residual });
        }
    };

    let mut times = Vec::with_capacity(samples);
    let mut states = Vec::with_capacity(samples);
    for step in 0..steps_per_period {
        if step % substeps == 0 {
            times.push((periods * steps_per_period + step) as f64 * dt);
            let state = DensityMatrix(rho);
            diagnostics.observe(&state, trace_target);
            states.push(state);
        }
        let t = (periods * steps_per_period + step) as f64 * dt;
        rho = eq.rk4(&rho, t, dt);
    }

    Ok(Trajectory {
        times,
        states,
        period,
        dt,
        periods,
        stroboscopic_residual: residual,
        diagnostics,
    })
}

/// Fourier coefficient `(1/T)∫ρ_ij(t) e^{+inωt} dt` over the sampled period,
/// ω = 2π/T. Element indices are 1-based.
pub fn extract_harmonic(traj: &Trajectory, element: (usize, usize), n: i64) -> Result<C> {
    let samples = traj.samples_per_period();
    if samples == 0 || n.unsigned_abs() as usize > samples / 2 - 1 {
        return Err(Error::HarmonicOutOfRange { n, samples });
    }
    let (i, j) = element;
    if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
        return Err(Error::InvalidInput(format!("no density-matrix element ({i}, {j})")));
    }
    // Samples sit at t = (P + k/samples)·T, so the phase reduces to k·n/samples.
    let s = samples as i64;
    let sum: C = traj
        .states
        .iter()
        .enumerate()
        .map(|(k, rho)| {
            let turns = (n * k as i64).rem_euclid(s) as f64 / samples as f64;
            rho.element(i, j) * C::from_polar(1.0, TAU * turns)
        })
        .sum();
    Ok(sum / samples as f64)
}

/// Steady-state a_0 (the zeroth harmonic of ρ31) starting from |1⟩⟨1|.
pub fn oracle_a0(cfg: &Configuration, settings: &IntegrationSettings) -> Result<(C, Trajectory)> {
    let traj = integrate_to_periodic_steady_state(cfg, DensityMatrix::pure(1), settings)?;
    let a0 = extract_harmonic(&traj, (3, 1), 0)?;
    Ok((a0, traj))
}
