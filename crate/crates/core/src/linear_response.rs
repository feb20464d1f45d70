//! Weak-probe steady state of the bichromatically driven Λ system.
//!
//! With all population pinned in |1⟩ the probe coherence `a = ρ31` and the
//! ground coherence `b = ρ21` obey
//!
//! ```text
//! da/dt = (iΔ_p − Γ/2) a + iΩ_p/2 + (i/2)(Ω_c1 e^{−iδt} + Ω_c2 e^{+iδt}) b
//! db/dt = (i(Δ_p − Δ_c) − γ21) b + (i/2)(Ω_c1 e^{+iδt} + Ω_c2 e^{−iδt}) a
//! ```
//!
//! The periodic steady state is expanded as `a = Σ a_n e^{−inδt}`,
//! `b = Σ b_n e^{−inδt}`, which turns the equations into
//!
//! ```text
//! D_a(n) a_n = iΩ_p/2 δ_{n0} + (i/2)(Ω_c1 b_{n−1} + Ω_c2 b_{n+1})
//! D_b(n) b_n = (i/2)(Ω_c1 a_{n+1} + Ω_c2 a_{n−1})
//! D_a(n) = Γ/2 − i(Δ_p + nδ),   D_b(n) = γ21 − i(Δ_p − Δ_c + nδ)
//! ```
//!
//! Only even `a_n` and odd `b_n` are driven. Two independent solvers are
//! provided: a direct banded solve of the truncated system and a continued
//! fraction over the even `a_n` after eliminating the `b_n`.

use num_complex::Complex64;
use serde::Serialize;

use crate::band::BandMatrix;
use crate::error::{Complex, Error, Result};
use crate::model::{Configuration, SolverMethod, SolverSettings};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Deepest truncation tried before giving up.
pub const MAX_ORDER: usize = 1 << 16;

/// Stand-in for an exactly vanishing `D_b(n)` in the continued fraction.
const TINY_DENOMINATOR: f64 = 1e-150;

/// Coefficients of the harmonic recurrence at one probe detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recurrence {
    pub gamma: f64,
    pub gamma21: f64,
    pub omega_c1: f64,
    pub omega_c2: f64,
    pub omega_p: f64,
    pub delta: f64,
    /// Average coupling detuning Δ_c.
    pub delta_c: f64,
    pub delta_p: f64,
}

impl Recurrence {
    pub fn d_a(&self, n: i64) -> Complex64 {
        Complex64::new(self.gamma / 2.0, -(self.delta_p + n as f64 * self.delta))
    }

    pub fn d_b(&self, n: i64) -> Complex64 {
        Complex64::new(
            self.gamma21,
            -(self.delta_p - self.delta_c + n as f64 * self.delta),
        )
    }

    /// iΩ_c1/2
    pub fn coupling_1(&self) -> Complex64 {
        I * (self.omega_c1 / 2.0)
    }

    /// iΩ_c2/2
    pub fn coupling_2(&self) -> Complex64 {
        I * (self.omega_c2 / 2.0)
    }

    /// iΩ_p/2, the drive term of the n = 0 probe equation.
    pub fn source(&self) -> Complex64 {
        I * (self.omega_p / 2.0)
    }

    pub fn is_decoupled(&self) -> bool {
        self.omega_c1 == 0.0 && self.omega_c2 == 0.0
    }

    /// Starting truncation for adaptive solves: `max(4, ⌈4(1 + (Ω_c1+Ω_c2)/2δ)⌉)`.
    pub fn initial_order(&self) -> usize {
        if self.delta <= 0.0 {
            return 4;
        }
        let est = 4.0 * (1.0 + (self.omega_c1 + self.omega_c2) / (2.0 * self.delta));
        (est.ceil() as usize).clamp(4, MAX_ORDER)
    }

    /// Closed-form decoupled coefficient a_0 = (iΩ_p/2)/D_a(0).
    fn bare_a0(&self) -> Complex64 {
        self.source() / self.d_a(0)
    }
}

/// Assemble the recurrence for a validated configuration at probe detuning `delta_p`.
pub fn build_recurrence(cfg: &Configuration, delta_p: f64) -> Recurrence {
    Recurrence {
        gamma: cfg.scheme.gamma,
        gamma21: cfg.scheme.gamma21,
        omega_c1: cfg.drive.omega_c1,
        omega_c2: cfg.drive.omega_c2,
        omega_p: cfg.probe.omega_p,
        delta: cfg.drive.delta,
        delta_c: cfg.drive.average_detuning(),
        delta_p,
    }
}

/// Floquet coefficients a_n, b_n for `n ∈ [−n_max, n_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicSpectrum {
    pub n_max: usize,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
}

impl HarmonicSpectrum {
    fn zeros(n_max: usize) -> Self {
        let len = 2 * n_max + 1;
        Self {
            n_max,
            a: vec![Complex64::new(0.0, 0.0); len],
            b: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn slot(&self, n: i64) -> Option<usize> {
        let m = self.n_max as i64;
        (-m..=m).contains(&n).then(|| (n + m) as usize)
    }

    /// a_n, zero outside the truncation.
    pub fn a(&self, n: i64) -> Complex64 {
        self.slot(n).map_or(Complex64::new(0.0, 0.0), |k| self.a[k])
    }

    pub fn b(&self, n: i64) -> Complex64 {
        self.slot(n).map_or(Complex64::new(0.0, 0.0), |k| self.b[k])
    }

    pub fn a0(&self) -> Complex64 {
        self.a(0)
    }

    pub fn orders(&self) -> impl Iterator<Item = i64> {
        let m = self.n_max as i64;
        -m..=m
    }

    /// Largest absolute residual of the truncated equations, treating
    /// coefficients beyond `n_max` as zero.
    pub fn max_residual(&self, rec: &Recurrence) -> f64 {
        self.orders()
            .flat_map(|n| {
                let src = if n == 0 { rec.source() } else { Complex64::new(0.0, 0.0) };
                let ra = rec.d_a(n) * self.a(n)
                    - src
                    - rec.coupling_1() * self.b(n - 1)
                    - rec.coupling_2() * self.b(n + 1);
                let rb = rec.d_b(n) * self.b(n)
                    - rec.coupling_1() * self.a(n + 1)
                    - rec.coupling_2() * self.a(n - 1);
                [ra.norm(), rb.norm()]
            })
            .fold(0.0, f64::max)
    }
}

/// Solve the `(4·n_max + 2)`-dimensional truncated system directly.
///
/// Unknowns are interleaved `a_{−N}, b_{−N}, …, a_N, b_N`, giving a band
/// matrix with three sub- and three super-diagonals. Couplings to
/// `b_{±(N+1)}` and `a_{±(N+1)}` are dropped.
pub fn solve_banded(rec: &Recurrence, n_max: usize) -> Result<HarmonicSpectrum> {
    let n = n_max as i64;
    let dim = 4 * n_max + 2;
    let mut m = BandMatrix::zeros(dim, 3, 3);
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
    let (c1, c2) = (rec.coupling_1(), rec.coupling_2());

    for k in -n..=n {
        let row_a = 2 * (k + n) as usize;
        let row_b = row_a + 1;
        m.add(row_a, row_a, rec.d_a(k));
        if k > -n {
            m.add(row_a, row_a - 1, -c1);
        }
        if k < n {
            m.add(row_a, row_a + 3, -c2);
        }
        m.add(row_b, row_b, rec.d_b(k));
        if k < n {
            m.add(row_b, row_b + 1, -c1);
        }
        if k > -n {
            m.add(row_b, row_b - 3, -c2);
        }
    }
    // A b_n with vanishing D_b whose couplings were all truncated or are
    // zero is unforced; pin it to zero instead of leaving an empty row.
    let zero = Complex64::new(0.0, 0.0);
    for row in (1..dim).step_by(2) {
        let lo = row.saturating_sub(3);
        let hi = (row + 3).min(dim - 1);
        if (lo..=hi).all(|j| m.get(row, j) == zero) {
            m.add(row, row, Complex64::new(1.0, 0.0));
        }
    }
    rhs[2 * n_max] = rec.source();

    let x = m.solve(&rhs)?;
    let mut out = HarmonicSpectrum::zeros(n_max);
    for (k, pair) in x.chunks_exact(2).enumerate() {
        out.a[k] = pair[0];
        out.b[k] = pair[1];
    }
    Ok(out)
}

fn safe(d: Complex64) -> Complex64 {
    if d == Complex64::new(0.0, 0.0) {
        Complex64::new(TINY_DENOMINATOR, 0.0)
    } else {
        d
    }
}

/// Three-term recurrence over even orders, after eliminating the b_n:
/// `Q_n a_n + L_n a_{n−2} + U_n a_{n+2} = iΩ_p/2 δ_{n0}`.
struct EvenRecurrence<'a> {
    rec: &'a Recurrence,
    cross: f64,
}

impl<'a> EvenRecurrence<'a> {
    fn new(rec: &'a Recurrence) -> Self {
        Self {
            rec,
            cross: rec.omega_c1 * rec.omega_c2 / 4.0,
        }
    }

    fn q(&self, n: i64) -> Complex64 {
        let r = self.rec;
        r.d_a(n)
            + (r.omega_c1 * r.omega_c1 / 4.0) / safe(r.d_b(n - 1))
            + (r.omega_c2 * r.omega_c2 / 4.0) / safe(r.d_b(n + 1))
    }

    fn lower(&self, n: i64) -> Complex64 {
        self.cross / safe(self.rec.d_b(n - 1))
    }

    fn upper(&self, n: i64) -> Complex64 {
        self.cross / safe(self.rec.d_b(n + 1))
    }

    /// Ratios `a_n / a_{n−2}` for n = 2, 4, …, 2·depth (index k ↔ n = 2k+2).
    fn ascending(&self, depth: usize) -> Vec<Complex64> {
        let mut ratios = vec![Complex64::new(0.0, 0.0); depth];
        let mut next = Complex64::new(0.0, 0.0);
        for k in (0..depth).rev() {
            let n = 2 * (k as i64 + 1);
            next = -self.lower(n) / (self.q(n) + self.upper(n) * next);
            ratios[k] = next;
        }
        ratios
    }

    /// Ratios `a_n / a_{n+2}` for n = −2, −4, …, −2·depth.
    fn descending(&self, depth: usize) -> Vec<Complex64> {
        let mut ratios = vec![Complex64::new(0.0, 0.0); depth];
        let mut next = Complex64::new(0.0, 0.0);
        for k in (0..depth).rev() {
            let n = -2 * (k as i64 + 1);
            next = -self.upper(n) / (self.q(n) + self.lower(n) * next);
            ratios[k] = next;
        }
        ratios
    }
}

/// Continued-fraction solution truncated at `a_{±(2·depth+2)} = 0`.
pub fn solve_continued_fraction_at_depth(rec: &Recurrence, depth: usize) -> HarmonicSpectrum {
    let n_max = 2 * depth + 1;
    let mut out = HarmonicSpectrum::zeros(n_max);
    let mid = n_max as i64;
    let at = |n: i64| (n + mid) as usize;

    let even = EvenRecurrence::new(rec);
    let up = even.ascending(depth);
    let down = even.descending(depth);
    let mut denom = even.q(0);
    if depth > 0 {
        denom += even.upper(0) * up[0] + even.lower(0) * down[0];
    }
    out.a[at(0)] = rec.source() / denom;

    for k in 0..depth {
        let n = 2 * (k as i64 + 1);
        out.a[at(n)] = up[k] * out.a[at(n - 2)];
        out.a[at(-n)] = down[k] * out.a[at(-n + 2)];
    }
    for n in (-mid..=mid).filter(|n| n.rem_euclid(2) == 1) {
        let drive = rec.coupling_1() * out.a(n + 1) + rec.coupling_2() * out.a(n - 1);
        out.b[at(n)] = drive / safe(rec.d_b(n));
    }
    out
}

fn settled(previous: Complex64, current: Complex64, rel_tol: f64) -> bool {
    (current - previous).norm() <= rel_tol * current.norm()
}

/// Continued-fraction solve, doubling the depth from the recurrence's
/// starting order until a_0 changes by less than `rel_tol` (relative).
pub fn solve_continued_fraction(rec: &Recurrence, rel_tol: f64) -> Result<HarmonicSpectrum> {
    solve_continued_fraction_from(rec, rel_tol, rec.initial_order())
}

pub fn solve_continued_fraction_from(
    rec: &Recurrence,
    rel_tol: f64,
    start_order: usize,
) -> Result<HarmonicSpectrum> {
    if rec.is_decoupled() {
        let mut out = HarmonicSpectrum::zeros(0);
        out.a[0] = rec.bare_a0();
        return Ok(out);
    }
    let mut depth = start_order.div_ceil(2).max(1);
    let mut previous = solve_continued_fraction_at_depth(rec, depth).a0();
    while depth < MAX_ORDER {
        depth *= 2;
        let next = solve_continued_fraction_at_depth(rec, depth);
        if settled(previous, next.a0(), rel_tol) {
            return Ok(next);
        }
        if depth >= MAX_ORDER {
            return Err(Error::ContinuedFractionDiverged {
                depth,
                previous: Complex(previous),
                last: Complex(next.a0()),
            });
        }
        previous = next.a0();
    }
    unreachable!("depth loop exits through return")
}

/// Banded solve with the truncation doubled until a_0 settles.
pub fn solve_banded_adaptive(rec: &Recurrence, rel_tol: f64, start_order: usize) -> Result<HarmonicSpectrum> {
    let mut n_max = start_order.max(2);
    let mut current = solve_banded(rec, n_max)?;
    while n_max < MAX_ORDER {
        n_max *= 2;
        let next = solve_banded(rec, n_max)?;
        if settled(current.a0(), next.a0(), rel_tol) {
            return Ok(next);
        }
        current = next;
    }
    let change = (current.a0() - solve_banded(rec, n_max / 2)?.a0()).norm();
    Err(Error::TruncationDiverged { n_max, change })
}

/// Dispatch on `settings`.
///
/// The banded method uses `settings.n_max` as is unless `adaptive`, in which
/// case the truncation starts at the larger of `settings.n_max` and the
/// recurrence's estimate. The continued fraction always converges itself.
pub fn solve(rec: &Recurrence, settings: &SolverSettings) -> Result<HarmonicSpectrum> {
    let start = if settings.adaptive {
        settings.n_max.max(rec.initial_order())
    } else {
        settings.n_max
    };
    match settings.method {
        SolverMethod::Banded if settings.adaptive => solve_banded_adaptive(rec, settings.rel_tol, start),
        SolverMethod::Banded => solve_banded(rec, settings.n_max),
        SolverMethod::ContinuedFraction => solve_continued_fraction_from(rec, settings.rel_tol, start),
    }
}

/// Normalized probe response at one detuning.
///
/// Absorption is `Im(a_0)·Γ/Ω_p` and dispersion `Re(a_0)·Γ/Ω_p`, so the bare
/// two-level resonance has absorption 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeResponse {
    pub delta_p: f64,
    pub absorption: f64,
    pub dispersion: f64,
    pub a0: Complex64,
    /// Truncation order of the accepted solution.
    pub n_max: usize,
}

impl ProbeResponse {
    fn from_a0(rec: &Recurrence, a0: Complex64, n_max: usize) -> Self {
        let scale = rec.gamma / rec.omega_p;
        Self {
            delta_p: rec.delta_p,
            absorption: a0.im * scale,
            dispersion: a0.re * scale,
            a0,
            n_max,
        }
    }
}

/// Probe response at the configuration's own probe detuning.
pub fn probe_response(cfg: &Configuration) -> Result<ProbeResponse> {
    probe_response_at(cfg, cfg.probe.delta_p)
}

pub fn probe_response_at(cfg: &Configuration, delta_p: f64) -> Result<ProbeResponse> {
    let rec = build_recurrence(cfg, delta_p);
    let spectrum = solve(&rec, &cfg.settings).map_err(|e| Error::at_detuning(delta_p, e))?;
    Ok(ProbeResponse::from_a0(&rec, spectrum.a0(), spectrum.n_max))
}

/// Closed-form a_0 for a single-frequency coupling of Rabi frequency `omega`.
///
/// Written as `(iΩ_p/2)·D_b / (D_a·D_b + Ω²/4)` so that it stays finite at
/// the two-photon resonance with γ21 = 0.
pub fn monochromatic_a0(
    gamma: f64,
    gamma21: f64,
    omega: f64,
    omega_p: f64,
    delta_c: f64,
    delta_p: f64,
) -> Complex64 {
    let d_a = Complex64::new(gamma / 2.0, -delta_p);
    let d_b = Complex64::new(gamma21, -(delta_p - delta_c));
    I * (omega_p / 2.0) * d_b / (d_a * d_b + omega * omega / 4.0)
}
