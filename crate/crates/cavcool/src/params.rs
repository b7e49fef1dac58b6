//! Physical parameters, unit convention, and small shared utilities.
//!
//! Every rate and frequency is measured in units of the atomic decay rate
//! Γ (`gamma_atom`), which therefore defaults to 1. Laser driving is
//! resonant with the atomic transition, so the bare frequencies never
//! appear: the cavity enters only through the atom-cavity detuning δ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Effective couplings `eta * g` below this fraction of the fastest system
/// frequency keep the phonon number a slow variable.
pub const VALIDITY_THRESHOLD: f64 = 0.1;

/// Lamb-Dicke parameters at or above this value leave the regime where the
/// linearised atom-phonon-photon coupling is trustworthy.
pub const LAMB_DICKE_WARN: f64 = 0.3;

/// The seven system parameters in units of `gamma_atom`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Trap (phonon) angular frequency ν.
    pub nu: f64,
    /// Atom-cavity detuning δ; the only parameter allowed to be negative.
    pub delta: f64,
    /// Laser Rabi frequency Ω.
    pub omega: f64,
    /// Cavity field decay rate κ.
    pub kappa: f64,
    /// Atomic decay rate Γ. Defines the unit of every other rate.
    pub gamma_atom: f64,
    /// Lamb-Dicke parameter η (dimensionless).
    pub eta: f64,
    /// Atom-cavity coupling constant g.
    pub g: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            nu: 1.0,
            delta: 1.0,
            omega: 1.0,
            kappa: 1.0,
            gamma_atom: 1.0,
            eta: 0.1,
            g: 1.0,
        }
    }
}

impl SystemParams {
    /// Check the hard type invariants.
    pub fn check(&self) -> Result<()> {
        let all_finite = [
            self.nu,
            self.delta,
            self.omega,
            self.kappa,
            self.gamma_atom,
            self.eta,
            self.g,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if self.nu <= 0.0 {
            return Err(Error::InvalidParams(format!("nu must be > 0, got {}", self.nu)));
        }
        if self.gamma_atom <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "gamma_atom must be > 0, got {}",
                self.gamma_atom
            )));
        }
        for (name, v) in [
            ("omega", self.omega),
            ("kappa", self.kappa),
            ("eta", self.eta),
            ("g", self.g),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Soft warning when the Lamb-Dicke expansion is questionable.
    pub fn lamb_dicke_warning(&self) -> Option<String> {
        (self.eta >= LAMB_DICKE_WARN).then(|| {
            format!(
                "eta = {} is outside the Lamb-Dicke regime (eta << 1); results are unreliable",
                self.eta
            )
        })
    }

    /// Load from a flat JSON object; missing keys fall back to defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let p: SystemParams = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParams(format!("parameter JSON: {e}")))?;
        p.check()?;
        Ok(p)
    }

    /// Effective decay rate γ_n = κ + n·Γ for this parameter set.
    pub fn gamma_n(&self, n: i32) -> f64 {
        gamma_n(n, self.kappa, self.gamma_atom)
    }

    /// Sideband parameters (ξ₊, ξ₋) for this parameter set.
    pub fn xi(&self) -> (f64, f64) {
        xi_pm(self.delta, self.nu)
    }

    /// Fastest frequency in the problem; bounds explicit time steps.
    pub fn omega_max(&self) -> f64 {
        self.nu
            .max(self.delta.abs())
            .max(self.omega)
            .max(self.kappa)
            .max(self.gamma_atom)
    }
}

/// Effective spontaneous decay rate γ_n = κ + n·Γ.
///
/// `n` may be negative and the result may then be negative too; the cooling
/// law uses γ₋₁ as a signed coefficient.
pub fn gamma_n(n: i32, kappa: f64, gamma_atom: f64) -> f64 {
    kappa + f64::from(n) * gamma_atom
}

/// Sideband parameters (ξ₊, ξ₋) = (2(δ+ν), 2(δ−ν)).
pub fn xi_pm(delta: f64, nu: f64) -> (f64, f64) {
    (2.0 * (delta + nu), 2.0 * (delta - nu))
}

/// Result of the slow-phonon validity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// η·g divided by max(|δ|, κ, ν).
    pub ratio: f64,
    pub threshold: f64,
    pub ok: bool,
}

/// Check that η·g is small against the fastest of |δ|, κ, ν, so that the
/// mean phonon number evolves much more slowly than the coherences.
pub fn validate(params: &SystemParams) -> ValidityReport {
    validate_with_threshold(params, VALIDITY_THRESHOLD)
}

pub fn validate_with_threshold(params: &SystemParams, threshold: f64) -> ValidityReport {
    let scale = params.delta.abs().max(params.kappa).max(params.nu);
    let ratio = params.eta * params.g / scale;
    ValidityReport {
        ratio,
        threshold,
        ok: ratio < threshold,
    }
}
