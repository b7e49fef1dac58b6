//! Numerical laboratory for cavity-mediated laser cooling of a particle
//! trapped along the cavity axis.
//!
//! Three mutually validating layers compute the stationary phonon number
//! and cooling rate:
//!
//! * [`analytic`] — closed-form cooling law, its weak- and strong-drive
//!   limits, and the catalogue of cooling/heating resonances,
//! * [`rateeq`] — the closed 17-dimensional linear system for the mean
//!   phonon number and the sixteen first-order coherences, solved and
//!   adiabatically eliminated numerically,
//! * [`lindblad`] — a full master-equation simulation on a truncated
//!   atom ⊗ phonon ⊗ cavity Fock space, the physical ground truth.
//!
//! [`scan`] sweeps the cooling laws over experimental parameters and
//! locates the triplet of cooling minima in the atom-cavity detuning.
//!
//! All rates and frequencies are expressed in units of the atomic decay
//! rate Γ unless stated otherwise.

pub mod analytic;
pub mod error;
pub mod lindblad;
pub mod params;
pub mod rateeq;
pub mod scan;

mod numfmt;

pub use analytic::{
    bloch_steady, bloch_trajectory, cooling_law_closed, resonance_catalogue,
    strong_drive_cooling_law, weak_drive_mss, BlochState, CoolingLaw, CoolingStatus,
    ResonanceCatalogue, ResonanceTriplet, WeakDriveMss,
};
pub use error::{Error, Result};
pub use lindblad::{FockConfig, FockModel, TrajectoryRecord, TruncationReport};
pub use params::{gamma_n, validate, xi_pm, SystemParams, ValidityReport};
pub use rateeq::{RateState, RateSystem};
pub use scan::{Grid, LawBackend, SweepAxis, SweepResult, SweepRow, SweepSpec};
