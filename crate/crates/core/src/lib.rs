//! Probe spectroscopy of a three-level Λ atom under an equal-amplitude
//! bichromatic coupling field.
//!
//! The coupling field's two components at ω_c ± δ dress the excited and
//! coupled ground state into a ladder with spacing δ, so a weak probe sees a
//! comb of absorption peaks separated by δ with transparency windows (and
//! steep normal dispersion) in between.
//!
//! * [`model`]: parameter types, unit handling, dressed-ladder prediction.
//! * [`linear_response`]: Floquet harmonics of the weak-probe response, by
//!   banded solve and by continued fraction.
//! * [`oracle`]: RK4 integration of the full three-level master equation to
//!   its periodic steady state, used to cross-check the linear response.
//! * [`spectroscopy`]: detuning scans, peak and window location, dispersion
//!   slopes, Zeeman line averaging and Beer–Lambert transmission.
//! * [`fitting`]: Nelder–Mead fits of model parameters to measured traces.
//! * [`cli`]: configuration files and the `bieit` command implementations.
//!
//! ```
//! use bichromatic_eit::prelude::*;
//!
//! let cfg = Configuration::new(
//!     AtomicLevelScheme::default(),
//!     BichromaticDrive::resonant(0.4, 0.7),
//!     ProbeField::default(),
//!     SolverSettings::default(),
//! )?;
//! let trace = scan(&cfg, (-2.0, 2.0), 401)?;
//! let peaks = find_peaks(&trace, 0.05)?;
//! assert_eq!(peaks.positions.len(), 3);
//! # Ok::<(), bichromatic_eit::Error>(())
//! ```

pub mod band;
pub mod cli;
pub mod error;
pub mod fitting;
pub mod io;
pub mod linear_response;
pub mod model;
pub mod oracle;
pub mod plot;
pub mod quadrature;
pub mod spectroscopy;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::linear_response::{probe_response, probe_response_at, ProbeResponse};
    pub use crate::model::{
        AtomicLevelScheme, BichromaticDrive, Configuration, ProbeField, SolverMethod, SolverSettings, Units,
    };
    pub use crate::spectroscopy::{
        dispersion_slope, find_peaks, peak_separations, scan, transmission, transparency_minima, zeeman_average,
        PeakSet, SpectrumTrace, ZeemanModel,
    };
}
