//! Closed-form results: zeroth-order electronic (Bloch) dynamics, the
//! effective cooling law, its weak- and strong-drive limits, and the
//! catalogue of cooling/heating resonances.
//!
//! The cooling law gives the mean phonon number an effective equation
//! `dm/dt = -gamma_c * m + c`, with both coefficients proportional to
//! (η g)². Its stationary point `m_ss = c / gamma_c` is the figure of
//! merit for cooling depth; `m_ss` has no physical meaning when
//! `gamma_c <= 0` (heating).

use crate::error::{Error, Result};
use crate::params::{gamma_n, SystemParams};

/// Zeroth-order electronic state of the driven atom.
///
/// `excited` is the excited-state population ⟨σ⁺σ⁻⟩, `sx` = ⟨σ⁻+σ⁺⟩ and
/// `sy` = ⟨i(σ⁻−σ⁺)⟩ are the two dipole quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub excited: f64,
    pub sx: f64,
    pub sy: f64,
}

/// Stationary state of the resonantly driven two-level atom:
/// (Ω²/(Γ²+2Ω²), 0, 2ΓΩ/(Γ²+2Ω²)).
pub fn bloch_steady(omega: f64, gamma_atom: f64) -> Result<BlochState> {
    if omega == 0.0 && gamma_atom == 0.0 {
        return Err(Error::UndefinedStationaryState);
    }
    let denom = gamma_atom * gamma_atom + 2.0 * omega * omega;
    Ok(BlochState {
        excited: omega * omega / denom,
        sx: 0.0,
        sy: 2.0 * gamma_atom * omega / denom,
    })
}

/// Exact solution of the three zeroth-order Bloch equations
///
/// ```text
/// d excited / dt = Ω/2 sy − Γ excited
/// d sx      / dt = −Γ/2 sx
/// d sy      / dt = Ω (1 − 2 excited) − Γ/2 sy
/// ```
///
/// after time `t >= 0`. `sx` decouples and decays as exp(−Γt/2) exactly;
/// the (excited, sy) pair is an affine 2×2 system solved by matrix
/// exponential in closed form.
pub fn bloch_trajectory(omega: f64, gamma_atom: f64, z0: &BlochState, t: f64) -> BlochState {
    let sx = z0.sx * (-0.5 * gamma_atom * t).exp();
    if omega == 0.0 && gamma_atom == 0.0 {
        return *z0;
    }
    let denom = gamma_atom * gamma_atom + 2.0 * omega * omega;
    let z1_ss = omega * omega / denom;
    let sy_ss = 2.0 * gamma_atom * omega / denom;

    // d/dt (excited, sy) = A (excited, sy) + (0, Ω)
    let a = [
        [-gamma_atom, 0.5 * omega],
        [-2.0 * omega, -0.5 * gamma_atom],
    ];
    let e = expm_2x2(&a, t);
    let d1 = z0.excited - z1_ss;
    let d3 = z0.sy - sy_ss;
    BlochState {
        excited: z1_ss + e[0][0] * d1 + e[0][1] * d3,
        sx,
        sy: sy_ss + e[1][0] * d1 + e[1][1] * d3,
    }
}

/// exp(A t) for a real 2×2 matrix, via
/// exp(At) = e^{st} [cosh(qt) I + sinh(qt)/q (A − sI)]
/// with s = tr A / 2 and q² = s² − det A (trigonometric branch for q² < 0).
fn expm_2x2(a: &[[f64; 2]; 2], t: f64) -> [[f64; 2]; 2] {
    let s = 0.5 * (a[0][0] + a[1][1]);
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let q2 = s * s - det;
    let (ch, shc) = if q2.abs() * t * t < 1e-24 {
        // q t -> 0: cosh -> 1, sinh(qt)/q -> t
        (1.0, t)
    } else if q2 > 0.0 {
        let q = q2.sqrt();
        ((q * t).cosh(), (q * t).sinh() / q)
    } else {
        let w = (-q2).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    };
    let es = (s * t).exp();
    [
        [es * (ch + shc * (a[0][0] - s)), es * shc * a[0][1]],
        [es * shc * a[1][0], es * (ch + shc * (a[1][1] - s))],
    ]
}

/// Which side of the effective cooling equation the parameters land on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoolingStatus {
    Cooling,
    Heating,
    /// Ω = 0: the law degenerates to 0/0 and no cooling takes place.
    NoDrive,
}

impl std::fmt::Display for CoolingStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoolingStatus::Cooling => "cooling",
            CoolingStatus::Heating => "heating",
            CoolingStatus::NoDrive => "nodrive",
        })
    }
}

/// Effective cooling equation dm/dt = −gamma_c·m + c_source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingLaw {
    /// Effective cooling rate; negative means net heating.
    pub gamma_c: f64,
    /// Constant source term (phonon emission into the sidebands).
    pub c_source: f64,
    /// Stationary phonon number c/gamma_c; `None` unless cooling.
    pub m_ss: Option<f64>,
    pub status: CoolingStatus,
}

impl CoolingLaw {
    fn package(gamma_c: f64, c_source: f64, m_ss_ratio: f64) -> Self {
        if gamma_c > 0.0 {
            CoolingLaw {
                gamma_c,
                c_source,
                m_ss: Some(m_ss_ratio),
                status: CoolingStatus::Cooling,
            }
        } else {
            CoolingLaw {
                gamma_c,
                c_source,
                m_ss: None,
                status: CoolingStatus::Heating,
            }
        }
    }

    pub(crate) fn no_drive() -> Self {
        CoolingLaw {
            gamma_c: 0.0,
            c_source: 0.0,
            m_ss: None,
            status: CoolingStatus::NoDrive,
        }
    }

    /// Package an eliminated (gamma_c, c) pair with m_ss = c/gamma_c.
    pub(crate) fn from_rates(gamma_c: f64, c_source: f64) -> Self {
        Self::package(gamma_c, c_source, c_source / gamma_c)
    }
}

/// Per-sideband response entering the cooling law: the brace expression
/// evaluated at ξ = ξ₊ weighs phonon emission (the 1+m coefficient), at
/// ξ = ξ₋ phonon absorption (the m coefficient).
fn sideband_response(xi: f64, omega: f64, kappa: f64, gamma_atom: f64) -> f64 {
    let g = |n: i32| gamma_n(n, kappa, gamma_atom);
    let (gm1, g0, g1, g2, g4) = (g(-1), g(0), g(1), g(2), g(4));
    let xi2 = xi * xi;
    let om2 = omega * omega;
    let direct = g1 / (g1 * g1 + xi2);
    let num = (g0 * g1 * g2 + gm1 * xi2) * (g2 * g2 + xi2) + 4.0 * om2 * (g0 * g2 * g2 + g4 * xi2);
    let den = (g0 * g0 + xi2)
        * ((g1 * g1 + xi2) * (g2 * g2 + xi2) + 8.0 * om2 * (g1 * g2 - xi2) + 16.0 * om2 * om2);
    direct + num / den
}

/// Closed-form cooling law from the adiabatically eliminated coherences.
///
/// With prefactor P = 2η²g²Ω²/(Γ²+2Ω²) and sideband responses A± at
/// ξ± = 2(δ±ν):
/// gamma_c = P (A₋ − A₊), c = P A₊, m_ss = A₊/(A₋ − A₊).
/// m_ss is computed from the prefactor-free ratio, so it is exactly
/// invariant under (η, g) → (η/s, g·s).
pub fn cooling_law_closed(params: &SystemParams) -> CoolingLaw {
    if params.omega == 0.0 {
        return CoolingLaw::no_drive();
    }
    let (xi_plus, xi_minus) = params.xi();
    let a_plus = sideband_response(xi_plus, params.omega, params.kappa, params.gamma_atom);
    let a_minus = sideband_response(xi_minus, params.omega, params.kappa, params.gamma_atom);
    let eg = params.eta * params.g;
    let om2 = params.omega * params.omega;
    let prefactor =
        2.0 * eg * eg * om2 / (params.gamma_atom * params.gamma_atom + 2.0 * om2);
    CoolingLaw::package(
        prefactor * (a_minus - a_plus),
        prefactor * a_plus,
        a_plus / (a_minus - a_plus),
    )
}

/// Outcome of the weak-drive sideband formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeakDriveMss {
    Cooling(f64),
    Heating,
}

/// Weak-drive limit of the cooling law,
/// m_ss = (κ² + 4(δ−ν)²) / (16 δ ν),
/// the sideband-cooling result with the atomic linewidth replaced by κ.
///
/// Recovering this from the full law requires dropping both Ω² terms *and*
/// taking Γ → 0; the Ω-dependent prefactor cancels in the m_ss ratio.
pub fn weak_drive_mss(delta: f64, nu: f64, kappa: f64) -> Result<WeakDriveMss> {
    if delta == 0.0 {
        return Err(Error::DivergentSidebandFormula);
    }
    let d = delta - nu;
    let value = (kappa * kappa + 4.0 * d * d) / (16.0 * delta * nu);
    if value < 0.0 {
        Ok(WeakDriveMss::Heating)
    } else {
        Ok(WeakDriveMss::Cooling(value))
    }
}

/// Strong-drive limit of the cooling law (regime Ω, ξ± ≫ κ, Γ):
/// brace(ξ) = γ₁/ξ² + (γ₋₁ξ² + 4γ₄Ω²)/(ξ⁴ − 8Ω²ξ² + 16Ω⁴),
/// prefactor η²g², same packaging as the full law.
///
/// The denominator factors as (ξ² − 4Ω²)², so the law has poles exactly on
/// the drive-shifted resonances ξ² = 4Ω² (and at ξ = 0).
pub fn strong_drive_cooling_law(params: &SystemParams) -> Result<CoolingLaw> {
    if params.omega == 0.0 {
        return Ok(CoolingLaw::no_drive());
    }
    let om2 = params.omega * params.omega;
    let g1 = params.gamma_n(1);
    let gm1 = params.gamma_n(-1);
    let g4 = params.gamma_n(4);
    let brace = |xi: f64| -> Result<f64> {
        let xi2 = xi * xi;
        let den = xi2 * xi2 - 8.0 * om2 * xi2 + 16.0 * om2 * om2;
        if xi2 == 0.0 || den == 0.0 {
            return Err(Error::ResonancePole { xi });
        }
        Ok(g1 / xi2 + (gm1 * xi2 + 4.0 * g4 * om2) / den)
    };
    let (xi_plus, xi_minus) = params.xi();
    let a_plus = brace(xi_plus)?;
    let a_minus = brace(xi_minus)?;
    let eg = params.eta * params.g;
    let prefactor = eg * eg;
    Ok(CoolingLaw::package(
        prefactor * (a_minus - a_plus),
        prefactor * a_plus,
        a_plus / (a_minus - a_plus),
    ))
}

/// Three detunings spaced by Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceTriplet {
    pub center: f64,
    pub minus: f64,
    pub plus: f64,
}

impl ResonanceTriplet {
    pub fn as_array(&self) -> [f64; 3] {
        [self.center, self.minus, self.plus]
    }
}

/// The cooling triplet δ₀ = ν, δ± = ν ± Ω and the heating triplet
/// μ₀ = −ν, μ± = −ν ± Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceCatalogue {
    pub cooling: ResonanceTriplet,
    pub heating: ResonanceTriplet,
}

/// Detunings at which phonon-annihilating (cooling) or phonon-creating
/// (heating) terms become time-independent in the dressed picture.
pub fn resonance_catalogue(nu: f64, omega: f64) -> ResonanceCatalogue {
    ResonanceCatalogue {
        cooling: ResonanceTriplet {
            center: nu,
            minus: nu - omega,
            plus: nu + omega,
        },
        heating: ResonanceTriplet {
            center: -nu,
            minus: -nu - omega,
            plus: -nu + omega,
        },
    }
}
