//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Bloch steady state with `omega == 0` and `gamma_atom == 0`.
    #[error("undefined stationary state: omega and gamma_atom are both zero")]
    UndefinedStationaryState,

    /// The weak-drive sideband formula has a pole at `delta == 0`.
    #[error("divergent sideband formula at delta = 0")]
    DivergentSidebandFormula,

    /// A strong-drive denominator vanishes (`xi == 0` or `xi^2 == 4 omega^2`).
    #[error("resonance pole: strong-drive denominator vanishes at xi = {xi}")]
    ResonancePole { xi: f64 },

    #[error("step too large: dt = {dt} exceeds 0.01/omega_max = {max_dt}")]
    StepTooLarge { dt: f64, max_dt: f64 },

    /// Rate matrix singular; happens exactly on a cooling/heating balance
    /// point where the effective cooling rate vanishes.
    #[error("no unique steady state: rate matrix is singular")]
    NoUniqueSteadyState,

    #[error("elimination singular: coherence block has no unique quasi-stationary solution")]
    EliminationSingular,

    #[error("Liouvillian dimension cap exceeded: D^2 = {d2} > {cap}")]
    DimensionCap { d2: usize, cap: usize },

    #[error("integration unstable: |tr rho - 1| = {drift:.3e} at t = {t}")]
    IntegrationUnstable { t: f64, drift: f64 },

    #[error("steady state not found: {0}")]
    SteadyStateNotFound(String),

    /// The Liouvillian null space has dimension > 1, e.g. at `eta * g == 0`
    /// where the phonon number is conserved and any phonon mixture is
    /// stationary.
    #[error("degenerate steady state: {0}")]
    DegenerateSteadyState(String),

    #[error("linear algebra backend: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}
