//! Parameterization of the bichromatically driven Λ system.
//!
//! Level |1⟩ is the probed ground state, |2⟩ the coupled ground state and
//! |3⟩ the shared excited state. The coupling field has two equal-amplitude
//! components at ω_c ± δ driving |2⟩ ↔ |3⟩; a weak probe drives |1⟩ ↔ |3⟩.
//!
//! All rates and detunings are held in units of the excited-state decay rate
//! Γ once a configuration has been validated. Γ in MHz is kept only so that
//! results can be reported back in laboratory units.
//!
//! Sign conventions:
//! * probe detuning Δ_p = ω_p − ω_31 (positive is blue of resonance),
//! * red-component detuning Δ_c2 = ω_0 − ω_c2,
//! * average coupling detuning Δ_c = Δ_c2 − δ, zero when the mean of the two
//!   coupling frequencies sits on the atomic line.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Γ of the Rb D₂ line, used when a configuration is given directly in units
/// of Γ and results must still be reported in MHz.
pub const DEFAULT_GAMMA_MHZ: f64 = 6.0;

/// Probe Rabi frequencies above this fraction of Γ leave the weak-probe regime.
pub const WEAK_PROBE_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Units {
    #[serde(rename = "MHz", alias = "mhz")]
    MHz,
    #[default]
    #[serde(rename = "Gamma", alias = "gamma")]
    Gamma,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Units::MHz => f.write_str("MHz"),
            Units::Gamma => f.write_str("Gamma"),
        }
    }
}

impl std::str::FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MHz" | "mhz" => Ok(Units::MHz),
            "Gamma" | "gamma" => Ok(Units::Gamma),
            other => Err(Error::InvalidInput(format!(
                "unknown unit system {other:?} (expected \"MHz\" or \"Gamma\")"
            ))),
        }
    }
}

/// Decay constants of the Λ system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomicLevelScheme {
    /// Excited-state decay rate.
    pub gamma: f64,
    /// Fraction of |3⟩ decay landing in |1⟩.
    #[serde(default = "half")]
    pub branch_31: f64,
    /// Fraction of |3⟩ decay landing in |2⟩.
    #[serde(default = "half")]
    pub branch_32: f64,
    /// Decay rate of the ground-state coherence ρ21.
    #[serde(default = "default_gamma21")]
    pub gamma21: f64,
}

fn half() -> f64 {
    0.5
}

fn default_gamma21() -> f64 {
    0.01
}

impl Default for AtomicLevelScheme {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            branch_31: 0.5,
            branch_32: 0.5,
            gamma21: 0.01,
        }
    }
}

impl AtomicLevelScheme {
    pub fn with_gamma21(mut self, gamma21: f64) -> Self {
        self.gamma21 = gamma21;
        self
    }
}

/// The two-frequency coupling field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BichromaticDrive {
    /// Rabi frequency of the blue component ω_c + δ.
    pub omega_c1: f64,
    /// Rabi frequency of the red component ω_c − δ.
    pub omega_c2: f64,
    /// Half the separation between the two components.
    pub delta: f64,
    /// Detuning ω_0 − ω_c2 of the red component.
    pub delta_c2: f64,
}

impl BichromaticDrive {
    /// Equal-amplitude drive whose mean frequency is on resonance.
    pub fn resonant(omega_c: f64, delta: f64) -> Self {
        Self {
            omega_c1: omega_c,
            omega_c2: omega_c,
            delta,
            delta_c2: delta,
        }
    }

    /// Single-frequency coupling with Rabi frequency `omega_c` at average detuning `delta_c`.
    pub fn monochromatic(omega_c: f64, delta_c: f64) -> Self {
        Self {
            omega_c1: omega_c,
            omega_c2: 0.0,
            delta: 0.0,
            delta_c2: delta_c,
        }
    }

    /// Same drive with both components set to `omega_c`.
    pub fn with_rabi(mut self, omega_c: f64) -> Self {
        self.omega_c1 = omega_c;
        self.omega_c2 = omega_c;
        self
    }

    pub fn average_detuning(&self) -> f64 {
        average_coupling_detuning(self)
    }

    pub fn is_monochromatic(&self) -> bool {
        self.delta == 0.0
    }
}

/// Weak probe on |1⟩ ↔ |3⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeField {
    pub omega_p: f64,
    #[serde(default)]
    pub delta_p: f64,
}

impl ProbeField {
    pub fn new(omega_p: f64, delta_p: f64) -> Self {
        Self { omega_p, delta_p }
    }

    pub fn at(self, delta_p: f64) -> Self {
        Self { delta_p, ..self }
    }
}

impl Default for ProbeField {
    fn default() -> Self {
        Self {
            omega_p: 0.01,
            delta_p: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SolverMethod {
    #[default]
    #[serde(rename = "banded")]
    Banded,
    #[serde(rename = "continued_fraction", alias = "cf")]
    ContinuedFraction,
}

impl std::str::FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "banded" => Ok(SolverMethod::Banded),
            "cf" | "continued_fraction" => Ok(SolverMethod::ContinuedFraction),
            other => Err(Error::InvalidInput(format!(
                "unknown solver method {other:?} (expected banded or cf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default)]
    pub method: SolverMethod,
    /// Harmonic truncation order (the starting order when `adaptive`).
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Double the truncation until a_0 settles.
    #[serde(default = "yes")]
    pub adaptive: bool,
}

fn default_n_max() -> usize {
    8
}

fn default_rel_tol() -> f64 {
    1e-10
}

fn yes() -> bool {
    true
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            method: SolverMethod::Banded,
            n_max: default_n_max(),
            rel_tol: default_rel_tol(),
            adaptive: true,
        }
    }
}

impl SolverSettings {
    pub fn with_method(mut self, method: SolverMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// Δ_c = Δ_c2 − δ.
pub fn average_coupling_detuning(drive: &BichromaticDrive) -> f64 {
    drive.delta_c2 - drive.delta
}

/// Predicted absorption-peak detunings `m·δ` for `m = −m_max ..= m_max`,
/// ascending. Valid for equal amplitudes at Δ_c = 0.
pub fn dressed_ladder(delta: f64, m_max: usize) -> Vec<f64> {
    let m = m_max as i64;
    (-m..=m).map(|k| k as f64 * delta).collect()
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub value: f64,
    pub message: String,
}

/// Every invariant violated by a candidate configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn check(&mut self, ok: bool, field: &'static str, value: f64, message: &str) {
        if !ok {
            self.violations.push(Violation {
                field,
                value,
                message: message.to_string(),
            });
        }
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {} = {}: {}", v.field, v.value, v.message)?;
        }
        Ok(())
    }
}

/// A validated configuration, normalized to units of Γ (so `scheme.gamma == 1`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Configuration {
    pub scheme: AtomicLevelScheme,
    pub drive: BichromaticDrive,
    pub probe: ProbeField,
    pub settings: SolverSettings,
    /// Γ in MHz, for reporting.
    pub gamma_mhz: f64,
    pub warnings: Vec<String>,
}

impl Configuration {
    /// Shortcut for parameters already expressed in units of Γ.
    pub fn new(
        scheme: AtomicLevelScheme,
        drive: BichromaticDrive,
        probe: ProbeField,
        settings: SolverSettings,
    ) -> Result<Self> {
        validate(scheme, drive, probe, settings, Units::Gamma)
    }

    pub fn with_gamma_mhz(mut self, gamma_mhz: f64) -> Self {
        self.gamma_mhz = gamma_mhz;
        self
    }

    pub fn with_drive(&self, drive: BichromaticDrive) -> Result<Self> {
        self.revalidate(self.scheme, drive, self.probe, self.settings)
    }

    pub fn with_scheme(&self, scheme: AtomicLevelScheme) -> Result<Self> {
        self.revalidate(scheme, self.drive, self.probe, self.settings)
    }

    pub fn with_probe(&self, probe: ProbeField) -> Result<Self> {
        self.revalidate(self.scheme, self.drive, probe, self.settings)
    }

    pub fn with_settings(&self, settings: SolverSettings) -> Result<Self> {
        self.revalidate(self.scheme, self.drive, self.probe, settings)
    }

    /// Copy with only the probe detuning changed. Skips revalidation since
    /// any finite detuning is admissible.
    pub fn at_detuning(&self, delta_p: f64) -> Self {
        let mut out = self.clone();
        out.probe.delta_p = delta_p;
        out
    }

    fn revalidate(
        &self,
        scheme: AtomicLevelScheme,
        drive: BichromaticDrive,
        probe: ProbeField,
        settings: SolverSettings,
    ) -> Result<Self> {
        Ok(validate(scheme, drive, probe, settings, Units::Gamma)?.with_gamma_mhz(self.gamma_mhz))
    }

    /// Convert a detuning in units of Γ to MHz.
    pub fn to_mhz(&self, value: f64) -> f64 {
        value * self.gamma_mhz
    }

    pub fn from_mhz(&self, value: f64) -> f64 {
        value / self.gamma_mhz
    }

    /// Express a Γ-unit quantity in `units`.
    pub fn to_units(&self, value: f64, units: Units) -> f64 {
        match units {
            Units::Gamma => value,
            Units::MHz => self.to_mhz(value),
        }
    }

    pub fn from_units(&self, value: f64, units: Units) -> f64 {
        match units {
            Units::Gamma => value,
            Units::MHz => self.from_mhz(value),
        }
    }
}

/// Check every invariant and normalize all rates to units of Γ.
///
/// With `Units::MHz` the scheme's `gamma` is Γ in MHz and every other rate is
/// in MHz. With `Units::Gamma` all values are already relative to Γ (and
/// `gamma` is normally 1). A monochromatic drive (`delta == 0`) has its red
/// component folded into `omega_c1`.
pub fn validate(
    scheme: AtomicLevelScheme,
    drive: BichromaticDrive,
    probe: ProbeField,
    settings: SolverSettings,
    units: Units,
) -> Result<Configuration> {
    let mut report = ValidationReport::default();

    let finite = [
        ("gamma", scheme.gamma),
        ("branch_31", scheme.branch_31),
        ("branch_32", scheme.branch_32),
        ("gamma21", scheme.gamma21),
        ("omega_c1", drive.omega_c1),
        ("omega_c2", drive.omega_c2),
        ("delta", drive.delta),
        ("delta_c2", drive.delta_c2),
        ("omega_p", probe.omega_p),
        ("delta_p", probe.delta_p),
        ("rel_tol", settings.rel_tol),
    ];
    for (field, value) in finite {
        report.check(value.is_finite(), field, value, "must be finite");
    }

    report.check(scheme.gamma > 0.0, "gamma", scheme.gamma, "gamma must be positive");
    report.check(
        scheme.branch_31 >= 0.0,
        "branch_31",
        scheme.branch_31,
        "branching fraction must be non-negative",
    );
    report.check(
        scheme.branch_32 >= 0.0,
        "branch_32",
        scheme.branch_32,
        "branching fraction must be non-negative",
    );
    let branch_sum = scheme.branch_31 + scheme.branch_32;
    report.check(
        branch_sum <= 1.0 + 1e-12,
        "branch_31 + branch_32",
        branch_sum,
        "branching fractions must sum to at most 1",
    );
    report.check(
        scheme.gamma21 >= 0.0,
        "gamma21",
        scheme.gamma21,
        "ground-state decoherence must be non-negative",
    );
    report.check(
        drive.omega_c1 >= 0.0,
        "omega_c1",
        drive.omega_c1,
        "Rabi frequency must be non-negative",
    );
    report.check(
        drive.omega_c2 >= 0.0,
        "omega_c2",
        drive.omega_c2,
        "Rabi frequency must be non-negative",
    );
    report.check(
        drive.delta >= 0.0,
        "delta",
        drive.delta,
        "half-separation must be positive (or zero for a monochromatic drive)",
    );
    report.check(probe.omega_p > 0.0, "omega_p", probe.omega_p, "probe Rabi frequency must be positive");
    report.check(
        settings.n_max >= 2,
        "n_max",
        settings.n_max as f64,
        "harmonic truncation must be at least 2",
    );
    report.check(
        settings.rel_tol > 0.0 && settings.rel_tol < 1e-2,
        "rel_tol",
        settings.rel_tol,
        "relative tolerance must lie in (0, 1e-2)",
    );

    if !report.is_empty() {
        return Err(Error::Validation(report));
    }

    let g = scheme.gamma;
    let gamma_mhz = match units {
        Units::MHz => g,
        Units::Gamma => DEFAULT_GAMMA_MHZ,
    };
    let scheme = AtomicLevelScheme {
        gamma: 1.0,
        branch_31: scheme.branch_31,
        branch_32: scheme.branch_32,
        gamma21: scheme.gamma21 / g,
    };
    let mut drive = BichromaticDrive {
        omega_c1: drive.omega_c1 / g,
        omega_c2: drive.omega_c2 / g,
        delta: drive.delta / g,
        delta_c2: drive.delta_c2 / g,
    };
    if drive.delta == 0.0 && drive.omega_c2 != 0.0 {
        drive.omega_c1 += drive.omega_c2;
        drive.omega_c2 = 0.0;
    }
    let probe = ProbeField {
        omega_p: probe.omega_p / g,
        delta_p: probe.delta_p / g,
    };

    let mut warnings = Vec::new();
    if probe.omega_p > WEAK_PROBE_LIMIT {
        warnings.push(format!(
            "omega_p = {}Γ exceeds the weak-probe limit {}Γ; linear response may be inaccurate",
            probe.omega_p, WEAK_PROBE_LIMIT
        ));
    }

    Ok(Configuration {
        scheme,
        drive,
        probe,
        settings,
        gamma_mhz,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base() -> (AtomicLevelScheme, BichromaticDrive, ProbeField, SolverSettings) {
        (
            AtomicLevelScheme::default(),
            BichromaticDrive::resonant(0.4, 0.7),
            ProbeField::default(),
            SolverSettings::default(),
        )
    }

    #[test]
    fn average_detuning_examples() {
        assert_eq!(average_coupling_detuning(&BichromaticDrive::resonant(0.4, 0.7)), 0.0);
        assert_eq!(average_coupling_detuning(&BichromaticDrive::monochromatic(0.4, 0.0)), 0.0);
        let fig6a = BichromaticDrive {
            omega_c1: 2.2,
            omega_c2: 2.2,
            delta: 3.35,
            delta_c2: 3.34,
        };
        assert!((average_coupling_detuning(&fig6a) + 0.01).abs() < 1e-12);
    }

    #[test]
    fn ladder_examples() {
        assert_eq!(dressed_ladder(0.7, 1), vec![-0.7, 0.0, 0.7]);
        assert_eq!(dressed_ladder(3.1, 0), vec![0.0]);
        let mhz: Vec<f64> = dressed_ladder(40.0 / 6.0, 1).iter().map(|d| d * 6.0).collect();
        for (got, want) in mhz.iter().zip([-40.0, 0.0, 40.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mhz_configuration_is_normalized() {
        let scheme = AtomicLevelScheme {
            gamma: 6.0,
            gamma21: 0.06,
            ..Default::default()
        };
        let drive = BichromaticDrive::resonant(13.8, 40.0);
        let cfg = validate(
            scheme,
            drive,
            ProbeField::new(0.6, 6.0),
            SolverSettings::default(),
            Units::MHz,
        )
        .unwrap();
        assert_eq!(cfg.scheme.gamma, 1.0);
        assert!((cfg.scheme.gamma21 - 0.01).abs() < 1e-15);
        assert!((cfg.drive.omega_c1 - 2.3).abs() < 1e-12);
        assert!((cfg.probe.delta_p - 1.0).abs() < 1e-15);
        assert_eq!(cfg.gamma_mhz, 6.0);
        assert!(cfg.warnings.is_empty());
    }

    #[test]
    fn zero_gamma_rejected() {
        let (mut s, d, p, st) = base();
        s.gamma = 0.0;
        let err = validate(s, d, p, st, Units::Gamma).unwrap_err();
        match err {
            Error::Validation(report) => {
                assert!(report.mentions("gamma"));
                assert!(report.to_string().contains("gamma must be positive"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_violation_reported() {
        let (mut s, mut d, mut p, mut st) = base();
        s.branch_31 = 0.8;
        s.gamma21 = -1.0;
        d.omega_c2 = -0.1;
        p.omega_p = 0.0;
        st.n_max = 1;
        st.rel_tol = 0.5;
        let Err(Error::Validation(report)) = validate(s, d, p, st, Units::Gamma) else {
            panic!("expected validation failure");
        };
        for field in ["branch_31 + branch_32", "gamma21", "omega_c2", "omega_p", "n_max", "rel_tol"] {
            assert!(report.mentions(field), "{field} missing from\n{report}");
        }
        assert_eq!(report.violations.len(), 6);
    }

    #[test]
    fn strong_probe_warns() {
        let (s, d, _, st) = base();
        let cfg = validate(s, d, ProbeField::new(0.5, 0.0), st, Units::Gamma).unwrap();
        assert_eq!(cfg.warnings.len(), 1);
        let cfg = validate(s, d, ProbeField::new(0.2, 0.0), st, Units::Gamma).unwrap();
        assert!(cfg.warnings.is_empty());
    }

    #[test]
    fn monochromatic_folds_components() {
        let (s, _, p, st) = base();
        let d = BichromaticDrive {
            omega_c1: 0.25,
            omega_c2: 0.15,
            delta: 0.0,
            delta_c2: 0.0,
        };
        let cfg = validate(s, d, p, st, Units::Gamma).unwrap();
        assert_eq!(cfg.drive.omega_c1, 0.4);
        assert_eq!(cfg.drive.omega_c2, 0.0);
    }

    proptest! {
        #[test]
        fn ladder_is_symmetric_and_evenly_spaced(delta in 1e-3f64..20.0, m_max in 0usize..30) {
            let ladder = dressed_ladder(delta, m_max);
            prop_assert_eq!(ladder.len(), 2 * m_max + 1);
            for (lo, hi) in ladder.iter().zip(ladder.iter().rev()) {
                prop_assert_eq!(*lo, -*hi);
            }
            for w in ladder.windows(2) {
                prop_assert!(((w[1] - w[0]) - delta).abs() <= 1e-12 * delta * m_max.max(1) as f64);
            }
        }

        #[test]
        fn average_detuning_is_linear(dc2 in -50.0f64..50.0, delta in 0.0f64..50.0, shift in -5.0f64..5.0) {
            let d = BichromaticDrive { omega_c1: 1.0, omega_c2: 1.0, delta, delta_c2: dc2 };
            let base = average_coupling_detuning(&d);
            let up = average_coupling_detuning(&BichromaticDrive { delta_c2: dc2 + shift, ..d });
            prop_assert!((up - base - shift).abs() < 1e-12);
            if delta + shift >= 0.0 {
                let wider = average_coupling_detuning(&BichromaticDrive { delta: delta + shift, ..d });
                prop_assert!((wider - base + shift).abs() < 1e-12);
            }
        }

        #[test]
        fn validate_is_idempotent(
            gamma in 0.5f64..10.0,
            g21 in 0.0f64..0.5,
            o1 in 0.0f64..5.0,
            o2 in 0.0f64..5.0,
            delta in 0.0f64..5.0,
            dc2 in -5.0f64..5.0,
            op in 0.001f64..0.5,
            dp in -5.0f64..5.0,
        ) {
            let scheme = AtomicLevelScheme { gamma, gamma21: g21, ..Default::default() };
            let drive = BichromaticDrive { omega_c1: o1, omega_c2: o2, delta, delta_c2: dc2 };
            let once = validate(scheme, drive, ProbeField::new(op, dp), SolverSettings::default(), Units::MHz).unwrap();
            let twice = validate(once.scheme, once.drive, once.probe, once.settings, Units::Gamma)
                .unwrap()
                .with_gamma_mhz(once.gamma_mhz);
            prop_assert_eq!(once, twice);
        }
    }
}
