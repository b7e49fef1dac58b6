//! The closed linear system for the mean phonon number and the sixteen
//! first-order coherences, plus its numerical adiabatic elimination.
//!
//! State layout (fixed, documented so test vectors are portable):
//!
//! ```text
//! index  0  : m                      mean phonon number
//! index 1-4 : x202 x203 x302 x303    j = 0 block, damped at γ₀/2
//! index 5-8 : x212 x213 x312 x313    j = 1 block, damped at γ₂/2
//! index 9-12: x222 x223 x322 x323    j = 2 block, damped at γ₁/2
//! index 13-16: x232 x233 x332 x333   j = 3 block, damped at γ₁/2
//! ```
//!
//! `x_ijk` is the expectation value of the Hermitian product operator
//! `B_i Σ_j C_k` with `B₂ = b + b†`, `B₃ = i(b − b†)`, `Σ₀ = 1`,
//! `Σ₁ = σ⁺σ⁻`, `Σ₂ = σ⁻ + σ⁺`, `Σ₃ = i(σ⁻ − σ⁺)` and the same pattern
//! for the cavity operators `C_k`. The sixteen coherence equations close
//! on themselves once the electronic state is frozen at its stationary
//! value, turning `dm/dt = ηg/2 (x322 + x333)` into an effective linear
//! cooling equation.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Factorize, Solve};
use std::io::{self, Write};

use crate::analytic::{bloch_steady, BlochState, CoolingLaw};
use crate::error::{Error, Result};
use crate::numfmt::push_float;
use crate::params::SystemParams;

/// Number of dynamical variables: m plus sixteen coherences.
pub const STATE_DIM: usize = 17;

/// Column labels in storage order.
pub const STATE_LABELS: [&str; STATE_DIM] = [
    "m", "x202", "x203", "x302", "x303", "x212", "x213", "x312", "x313", "x222", "x223", "x322",
    "x323", "x232", "x233", "x332", "x333",
];

/// Position of a labelled variable in the state vector.
pub fn state_index(label: &str) -> Option<usize> {
    STATE_LABELS.iter().position(|l| *l == label)
}

const M: usize = 0;
const X202: usize = 1;
const X203: usize = 2;
const X302: usize = 3;
const X303: usize = 4;
const X212: usize = 5;
const X213: usize = 6;
const X312: usize = 7;
const X313: usize = 8;
const X222: usize = 9;
const X223: usize = 10;
const X322: usize = 11;
const X323: usize = 12;
const X232: usize = 13;
const X233: usize = 14;
const X332: usize = 15;
const X333: usize = 16;

/// A point of the 17-dimensional state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateState(pub [f64; STATE_DIM]);

impl RateState {
    /// All-zero coherences and zero phonons.
    pub fn zero() -> Self {
        RateState([0.0; STATE_DIM])
    }

    /// `m` phonons, all coherences zero (a factorized Fock-diagonal start).
    pub fn with_phonons(m: f64) -> Self {
        let mut y = [0.0; STATE_DIM];
        y[M] = m;
        RateState(y)
    }

    pub fn mean_phonons(&self) -> f64 {
        self.0[M]
    }
}

/// Coefficient matrix and source of the closed linear system
/// `dy/dt = M y + b`.
#[derive(Debug, Clone)]
pub struct RateSystem {
    pub matrix: Array2<f64>,
    pub source: Array1<f64>,
    /// Fastest frequency of the generating parameters; bounds the
    /// integrator step (`dt <= 0.01 / omega_max`).
    pub omega_max: f64,
}

/// Transcribe the sixteen coherence equations and the phonon-number
/// equation into matrix form.
///
/// Source terms of the form `coef · (1 + 2m) · z` split into a constant
/// part `coef·z` (into `b`) and an m-proportional part `2·coef·z` (into
/// column 0 of `M`); `z` is normally the stationary electronic state but
/// any caller-supplied state is accepted (the `sx` terms are kept even
/// though they vanish at stationarity).
pub fn assemble(params: &SystemParams, z: &BlochState) -> RateSystem {
    let nu = params.nu;
    let delta = params.delta;
    let omega = params.omega;
    let g0 = params.gamma_n(0);
    let g1 = params.gamma_n(1);
    let g2 = params.gamma_n(2);
    let eg = params.eta * params.g;
    let (z1, z2, z3) = (z.excited, z.sx, z.sy);

    let mut m = Array2::<f64>::zeros((STATE_DIM, STATE_DIM));
    let mut b = Array1::<f64>::zeros(STATE_DIM);

    // dm/dt = ηg/2 (x322 + x333)
    m[[M, X322]] = 0.5 * eg;
    m[[M, X333]] = 0.5 * eg;

    // j = 0 block, damping γ₀/2
    m[[X202, X302]] = -nu;
    m[[X202, X203]] = -delta;
    m[[X202, M]] = -2.0 * eg * z3;
    b[X202] = -eg * z3;
    m[[X202, X202]] = -0.5 * g0;

    m[[X203, X303]] = -nu;
    m[[X203, X202]] = delta;
    m[[X203, M]] = 2.0 * eg * z2;
    b[X203] = eg * z2;
    m[[X203, X203]] = -0.5 * g0;

    m[[X302, X202]] = nu;
    m[[X302, X303]] = -delta;
    b[X302] = eg * z2;
    m[[X302, X302]] = -0.5 * g0;

    m[[X303, X203]] = nu;
    m[[X303, X302]] = delta;
    b[X303] = eg * z3;
    m[[X303, X303]] = -0.5 * g0;

    // j = 1 block, damping γ₂/2
    m[[X212, X312]] = -nu;
    m[[X212, X213]] = -delta;
    m[[X212, X232]] = 0.5 * omega;
    m[[X212, X212]] = -0.5 * g2;

    m[[X213, X313]] = -nu;
    m[[X213, X212]] = delta;
    m[[X213, X233]] = 0.5 * omega;
    m[[X213, X213]] = -0.5 * g2;

    m[[X312, X212]] = nu;
    m[[X312, X313]] = -delta;
    m[[X312, X332]] = 0.5 * omega;
    m[[X312, X312]] = -0.5 * g2;

    m[[X313, X213]] = nu;
    m[[X313, X312]] = delta;
    m[[X313, X333]] = 0.5 * omega;
    m[[X313, X313]] = -0.5 * g2;

    // j = 2 block, damping γ₁/2; closed in itself
    m[[X222, X322]] = -nu;
    m[[X222, X223]] = -delta;
    m[[X222, X222]] = -0.5 * g1;

    m[[X223, X323]] = -nu;
    m[[X223, X222]] = delta;
    m[[X223, M]] = 4.0 * eg * z1;
    b[X223] = 2.0 * eg * z1;
    m[[X223, X223]] = -0.5 * g1;

    m[[X322, X222]] = nu;
    m[[X322, X323]] = -delta;
    b[X322] = 2.0 * eg * z1;
    m[[X322, X322]] = -0.5 * g1;

    m[[X323, X223]] = nu;
    m[[X323, X322]] = delta;
    m[[X323, X323]] = -0.5 * g1;

    // j = 3 block, damping γ₁/2; drive-coupled to the j = 0, 1 blocks
    m[[X232, X332]] = -nu;
    m[[X232, X233]] = -delta;
    m[[X232, X202]] = omega;
    m[[X232, X212]] = -2.0 * omega;
    m[[X232, M]] = -4.0 * eg * z1;
    b[X232] = -2.0 * eg * z1;
    m[[X232, X232]] = -0.5 * g1;

    m[[X233, X333]] = -nu;
    m[[X233, X232]] = delta;
    m[[X233, X203]] = omega;
    m[[X233, X213]] = -2.0 * omega;
    m[[X233, X233]] = -0.5 * g1;

    m[[X332, X232]] = nu;
    m[[X332, X333]] = -delta;
    m[[X332, X302]] = omega;
    m[[X332, X312]] = -2.0 * omega;
    m[[X332, X332]] = -0.5 * g1;

    m[[X333, X233]] = nu;
    m[[X333, X332]] = delta;
    m[[X333, X303]] = omega;
    m[[X333, X313]] = -2.0 * omega;
    b[X333] = 2.0 * eg * z1;
    m[[X333, X333]] = -0.5 * g1;

    RateSystem {
        matrix: m,
        source: b,
        omega_max: params.omega_max(),
    }
}

/// Fixed-step classical Runge-Kutta on `dy/dt = M y + b`.
///
/// The step is uniformly shrunk so an integer number of steps reaches
/// `t_final` exactly; the returned trajectory includes the initial point.
pub fn integrate(
    sys: &RateSystem,
    y0: &RateState,
    t_final: f64,
    dt: f64,
) -> Result<Vec<(f64, RateState)>> {
    let max_dt = 0.01 / sys.omega_max;
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, max_dt });
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParams(format!(
            "t_final must be > 0, got {t_final}"
        )));
    }
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;

    // flatten for the hot loop
    let mut mat = [[0.0; STATE_DIM]; STATE_DIM];
    for i in 0..STATE_DIM {
        for j in 0..STATE_DIM {
            mat[i][j] = sys.matrix[[i, j]];
        }
    }
    let mut src = [0.0; STATE_DIM];
    for (i, s) in src.iter_mut().enumerate() {
        *s = sys.source[i];
    }
    let deriv = |y: &[f64; STATE_DIM], out: &mut [f64; STATE_DIM]| {
        for i in 0..STATE_DIM {
            let row = &mat[i];
            let mut acc = src[i];
            for j in 0..STATE_DIM {
                acc += row[j] * y[j];
            }
            out[i] = acc;
        }
    };

    let mut traj = Vec::with_capacity(steps + 1);
    let mut y = y0.0;
    traj.push((0.0, RateState(y)));
    let (mut k1, mut k2, mut k3, mut k4) = ([0.0; STATE_DIM], [0.0; STATE_DIM], [0.0; STATE_DIM], [0.0; STATE_DIM]);
    let mut tmp = [0.0; STATE_DIM];
    for n in 1..=steps {
        deriv(&y, &mut k1);
        for i in 0..STATE_DIM {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        deriv(&tmp, &mut k2);
        for i in 0..STATE_DIM {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        deriv(&tmp, &mut k3);
        for i in 0..STATE_DIM {
            tmp[i] = y[i] + h * k3[i];
        }
        deriv(&tmp, &mut k4);
        for i in 0..STATE_DIM {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        traj.push((n as f64 * h, RateState(y)));
    }
    Ok(traj)
}

/// Stationary point of `dy/dt = M y + b`, i.e. the solution of `M y = -b`.
///
/// `M` is singular exactly on a cooling/heating balance point
/// (`gamma_c = 0`), where no unique steady state exists.
pub fn steady_state(sys: &RateSystem) -> Result<RateState> {
    let rhs = -&sys.source;
    let factor = sys
        .matrix
        .factorize()
        .map_err(|_| Error::NoUniqueSteadyState)?;
    let mut y = factor.solve(&rhs).map_err(|_| Error::NoUniqueSteadyState)?;

    // residual check with one step of iterative refinement
    let b_scale = sys.source.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = if b_scale > 0.0 { 1e-10 * b_scale } else { 1e-14 };
    let resid_norm = |y: &Array1<f64>| -> f64 {
        let r = sys.matrix.dot(y) + &sys.source;
        r.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    };
    if resid_norm(&y) > tol {
        let r = sys.matrix.dot(&y) + &sys.source;
        let dy = factor.solve(&r).map_err(|_| Error::NoUniqueSteadyState)?;
        y -= &dy;
        if resid_norm(&y) > tol {
            return Err(Error::NoUniqueSteadyState);
        }
    }

    let mut out = [0.0; STATE_DIM];
    for (o, v) in out.iter_mut().zip(y.iter()) {
        *o = *v;
    }
    Ok(RateState(out))
}

/// Adiabatic elimination of the sixteen coherences: set their time
/// derivatives to zero and solve the coherence block twice, once for the
/// constant source (giving `c`) and once for the m-proportional response
/// (giving `-gamma_c`). Independent of the closed-form transcription and
/// must agree with it.
pub fn eliminate(params: &SystemParams) -> Result<CoolingLaw> {
    if params.omega == 0.0 {
        return Ok(CoolingLaw::no_drive());
    }
    let z = bloch_steady(params.omega, params.gamma_atom)?;
    let sys = assemble(params, &z);

    let coherence_block = sys.matrix.slice(s![1.., 1..]).to_owned();
    let m_column = sys.matrix.slice(s![1.., 0]).to_owned();
    let source = sys.source.slice(s![1..]).to_owned();
    let m_row = sys.matrix.slice(s![0, 1..]);

    let factor = coherence_block
        .factorize()
        .map_err(|_| Error::EliminationSingular)?;
    let x_const = factor
        .solve(&(-&source))
        .map_err(|_| Error::EliminationSingular)?;
    let x_resp = factor
        .solve(&(-&m_column))
        .map_err(|_| Error::EliminationSingular)?;

    let dot = |x: &Array1<f64>| m_row.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>();
    let c = dot(&x_const);
    let gamma_c = -dot(&x_resp);
    Ok(CoolingLaw::from_rates(gamma_c, c))
}

/// Write a trajectory as CSV with header `t,m,x202,...,x333`,
/// 15 significant digits in scientific notation.
pub fn write_trajectory_csv<W: Write>(out: &mut W, traj: &[(f64, RateState)]) -> io::Result<()> {
    let mut line = String::from("t");
    for label in STATE_LABELS {
        line.push(',');
        line.push_str(label);
    }
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for (t, y) in traj {
        line.clear();
        push_float(&mut line, *t);
        for v in y.0 {
            line.push(',');
            push_float(&mut line, v);
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{cooling_law_closed, CoolingStatus};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    fn params(nu: f64, delta: f64, omega: f64, kappa: f64, eta: f64, g: f64) -> SystemParams {
        SystemParams {
            nu,
            delta,
            omega,
            kappa,
            gamma_atom: 1.0,
            eta,
            g,
        }
    }

    fn stationary(p: &SystemParams) -> RateSystem {
        assemble(p, &bloch_steady(p.omega, p.gamma_atom).unwrap())
    }

    #[test]
    fn eta_zero_freezes_phonon_number() {
        let p = params(1.0, 3.0, 2.0, 1.0, 0.0, 5.0);
        let sys = stationary(&p);
        assert!(sys.matrix.row(0).iter().all(|v| *v == 0.0));
        assert_eq!(sys.source[0], 0.0);
        // row 0 zero makes the full matrix singular: no unique steady state
        assert!(matches!(
            steady_state(&sys),
            Err(Error::NoUniqueSteadyState)
        ));
    }

    #[test]
    fn omega_zero_kills_sources_and_decouples_blocks() {
        let p = params(1.0, 3.0, 0.0, 1.0, 0.1, 2.0);
        let sys = stationary(&p);
        assert!(sys.source.iter().all(|v| *v == 0.0));
        // j = 2 rows (9..13) and j = 3 rows (13..17) only couple inside
        // their own block; only the m row reads across them.
        for i in 9..13 {
            for j in 1..STATE_DIM {
                if !(9..13).contains(&j) {
                    assert_eq!(sys.matrix[[i, j]], 0.0, "row {i} col {j}");
                }
            }
        }
        for i in 13..17 {
            for j in 1..STATE_DIM {
                if !(13..17).contains(&j) {
                    assert_eq!(sys.matrix[[i, j]], 0.0, "row {i} col {j}");
                }
            }
        }
    }

    #[test]
    fn m_row_reads_the_two_cooling_coherences() {
        let p = params(1.0, 3.0, 2.0, 1.0, 0.1, 2.0);
        let sys = stationary(&p);
        assert_eq!(sys.matrix[[0, state_index("x322").unwrap()]], 0.1);
        assert_eq!(sys.matrix[[0, state_index("x333").unwrap()]], 0.1);
        let nonzero: usize = sys.matrix.row(0).iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn coherence_diagonals_are_damped_by_at_least_half_kappa() {
        for p in [
            params(1.0, 3.0, 2.0, 1.0, 0.1, 2.0),
            params(5.0, -2.0, 10.0, 0.3, 0.05, 1.0),
        ] {
            let sys = stationary(&p);
            for i in 1..STATE_DIM {
                assert!(sys.matrix[[i, i]] <= -0.5 * p.kappa);
            }
        }
    }

    #[test]
    fn integrate_holds_fixed_point() {
        let p = params(1.0, 3.0, 2.0, 1.0, 0.05, 2.0);
        let sys = stationary(&p);
        let y_ss = steady_state(&sys).unwrap();
        let traj = integrate(&sys, &y_ss, 5.0, 0.01 / sys.omega_max).unwrap();
        for (_, y) in traj {
            for i in 0..STATE_DIM {
                assert!((y.0[i] - y_ss.0[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn integrate_null_dynamics() {
        let sys = RateSystem {
            matrix: Array2::zeros((STATE_DIM, STATE_DIM)),
            source: Array1::zeros(STATE_DIM),
            omega_max: 1.0,
        };
        let y0 = RateState::with_phonons(3.5);
        let traj = integrate(&sys, &y0, 1.0, 0.01).unwrap();
        assert_eq!(traj.last().unwrap().1, y0);
    }

    #[test]
    fn integrate_rejects_large_step() {
        let p = params(1.0, 6.0, 5.0, 1.0, 0.05, 1.0);
        let sys = stationary(&p);
        assert!(matches!(
            integrate(&sys, &RateState::zero(), 1.0, 0.5),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn homogeneous_system_relaxes_to_zero() {
        let p = params(1.0, 6.0, 5.0, 1.0, 0.05, 1.0);
        let mut sys = stationary(&p);
        sys.source.fill(0.0);
        let y = steady_state(&sys).unwrap();
        assert!(y.0.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn steady_state_matches_closed_form_mss() {
        let p = params(1.0, 6.0, 5.0, 1.0, 0.05, 1.0);
        let y = steady_state(&stationary(&p)).unwrap();
        // frozen from the independent elimination oracle
        assert_relative_eq!(y.mean_phonons(), 2.864383444419241e-1, max_relative = 1e-9);
        let law = cooling_law_closed(&p);
        assert_relative_eq!(y.mean_phonons(), law.m_ss.unwrap(), max_relative = 1e-9);
    }

    #[test]
    fn heating_parameters_give_negative_m() {
        let p = params(1.0, -1.0, 5.0, 1.0, 0.05, 1.0);
        let y = steady_state(&stationary(&p)).unwrap();
        assert!(y.mean_phonons() < 0.0);
    }

    #[test]
    fn eliminate_reference_values() {
        let law = eliminate(&params(1.0, 6.0, 5.0, 1.0, 0.1, 1.0)).unwrap();
        assert_relative_eq!(law.gamma_c, 1.680476914967012e-3, max_relative = 1e-11);
        assert_relative_eq!(law.c_source, 4.813530253960230e-4, max_relative = 1e-11);

        let law = eliminate(&params(1.0, 1.0, 10.0, 1.0, 0.02, 1.0)).unwrap();
        assert_relative_eq!(law.gamma_c, 1.625383918321849e-4, max_relative = 1e-11);
        assert_relative_eq!(law.m_ss.unwrap(), 2.786385631863019e-1, max_relative = 1e-11);
    }

    #[test]
    fn eliminate_agrees_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..200 {
            let nu: f64 = rng.random_range(0.2..20.0);
            let kappa: f64 = rng.random_range(0.2..20.0);
            let omega: f64 = rng.random_range(0.5..50.0);
            let delta: f64 = rng.random_range(-2.0 * (nu + omega)..2.0 * (nu + omega));
            let eta = 0.05;
            let g = 0.1 * nu.max(kappa).max(delta.abs()) / eta * rng.random_range(0.1..1.0);
            let p = params(nu, delta, omega, kappa, eta, g);
            let closed = cooling_law_closed(&p);
            let elim = eliminate(&p).unwrap();
            assert_relative_eq!(elim.gamma_c, closed.gamma_c, max_relative = 1e-9);
            assert_relative_eq!(elim.c_source, closed.c_source, max_relative = 1e-9);
        }
    }

    #[test]
    fn eliminate_scales_exactly_with_eta_squared() {
        let base = params(1.0, 6.0, 5.0, 1.0, 0.05, 1.0);
        let doubled = SystemParams { eta: 2.0 * base.eta, ..base };
        let a = eliminate(&base).unwrap();
        let b = eliminate(&doubled).unwrap();
        // doubling eta scales every source exactly by a power of two
        assert_eq!(b.gamma_c, 4.0 * a.gamma_c);
        assert_eq!(b.c_source, 4.0 * a.c_source);
    }

    #[test]
    fn eliminate_vanishing_drive() {
        let p = params(1.0, 1.0, 1e-6, 1.0, 0.1, 1.0);
        let law = eliminate(&p).unwrap();
        assert!(law.gamma_c.abs() < 1e-12);
        let law = eliminate(&params(1.0, 1.0, 0.0, 1.0, 0.1, 1.0)).unwrap();
        assert_eq!(law.status, CoolingStatus::NoDrive);
    }

    /// Eliminating the self-contained j = 2 block first and then the
    /// remaining twelve equations must reproduce the joint 16x16 solve.
    #[test]
    fn elimination_order_is_irrelevant() {
        let p = params(1.3, 4.2, 3.0, 0.8, 0.05, 2.0);
        let z = bloch_steady(p.omega, p.gamma_atom).unwrap();
        let sys = assemble(&p, &z);
        let c = sys.matrix.slice(s![1.., 1..]);
        let u = sys.matrix.slice(s![1.., 0]);
        let b = sys.source.slice(s![1..]);

        // coherence-space indices: j2 barred rows 8..12, the rest is 12-dim
        let j2: Vec<usize> = (8..12).collect();
        let rest: Vec<usize> = (0..8).chain(12..16).collect();
        for &i in &j2 {
            for &j in &rest {
                assert_eq!(c[[i, j]], 0.0, "j2 block must be self-contained");
            }
        }

        let solve_block = |idx: &[usize], rhs_of: &dyn Fn(usize) -> f64| -> Array1<f64> {
            let n = idx.len();
            let mut a = Array2::zeros((n, n));
            let mut r = Array1::zeros(n);
            for (ii, &gi) in idx.iter().enumerate() {
                r[ii] = rhs_of(gi);
                for (jj, &gj) in idx.iter().enumerate() {
                    a[[ii, jj]] = c[[gi, gj]];
                }
            }
            a.solve(&r).unwrap()
        };

        // affine solution x = x_const + x_resp * m for each block
        let x322 = 10 - 8; // position inside the j2 block
        let x333 = 8 + 3; // position inside the 12-dim rest block
        let j2_const = solve_block(&j2, &|i| -b[i]);
        let j2_resp = solve_block(&j2, &|i| -u[i]);
        let rest_const = solve_block(&rest, &|i| -b[i]);
        let rest_resp = solve_block(&rest, &|i| -u[i]);

        let half_eg = 0.5 * p.eta * p.g;
        let c_two_step = half_eg * (j2_const[x322] + rest_const[x333]);
        let gamma_two_step = -half_eg * (j2_resp[x322] + rest_resp[x333]);

        let joint = eliminate(&p).unwrap();
        assert_relative_eq!(c_two_step, joint.c_source, max_relative = 1e-10);
        assert_relative_eq!(gamma_two_step, joint.gamma_c, max_relative = 1e-10);
    }

    #[test]
    fn coherence_block_is_stable() {
        use ndarray_linalg::Eig;
        for p in [
            params(1.0, 6.0, 5.0, 1.0, 0.05, 1.0),
            params(3.0, -4.0, 12.0, 0.4, 0.02, 3.0),
        ] {
            let sys = stationary(&p);
            let block = sys.matrix.slice(s![1.., 1..]).to_owned();
            let (eigs, _) = block.eig().unwrap();
            for ev in eigs {
                assert!(ev.re <= -0.5 * p.kappa + 1e-12, "eigenvalue {ev} too slow");
            }
        }
    }

    #[test]
    fn steady_state_m_is_ratio_of_eliminated_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let nu = rng.random_range(0.5..5.0);
            let kappa = rng.random_range(0.5..5.0);
            let omega = rng.random_range(0.5..10.0);
            let delta = rng.random_range(0.3 * nu..1.5 * (nu + omega));
            let p = params(nu, delta, omega, kappa, 0.05, 1.0);
            let law = eliminate(&p).unwrap();
            if law.status != CoolingStatus::Cooling {
                continue;
            }
            let y = steady_state(&stationary(&p)).unwrap();
            assert_relative_eq!(
                y.mean_phonons(),
                law.c_source / law.gamma_c,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn relaxation_reaches_steady_state() {
        // fast-relaxing parameter point so the full 30/gamma_c horizon
        // stays cheap; the slow spec-book example runs under --ignored
        let p = params(3.0, 3.0, 3.0, 3.0, 0.05, 6.0);
        let sys = stationary(&p);
        let law = eliminate(&p).unwrap();
        let t_final = 30.0 / law.gamma_c;
        let traj = integrate(
            &sys,
            &RateState::with_phonons(5.0),
            t_final,
            0.01 / sys.omega_max,
        )
        .unwrap();
        let m_end = traj.last().unwrap().1.mean_phonons();
        let m_ss = steady_state(&sys).unwrap().mean_phonons();
        assert!((m_end - m_ss).abs() < 1e-6);
    }

    #[test]
    #[ignore = "slow: ~4e7 integration steps"]
    fn relaxation_reaches_steady_state_reference_point() {
        let p = params(1.0, 6.0, 5.0, 1.0, 0.05, 1.0);
        let sys = stationary(&p);
        let law = eliminate(&p).unwrap();
        let traj = integrate(
            &sys,
            &RateState::with_phonons(5.0),
            30.0 / law.gamma_c,
            0.01 / sys.omega_max,
        )
        .unwrap();
        let m_end = traj.last().unwrap().1.mean_phonons();
        let m_ss = steady_state(&sys).unwrap().mean_phonons();
        assert!((m_end - m_ss).abs() < 1e-6);
    }

    #[test]
    fn trajectory_csv_format() {
        let traj = vec![(0.0, RateState::with_phonons(2.0))];
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,m,x202,x203,x302,x303,x212,x213,x312,x313,x222,x223,x322,x323,x232,x233,x332,x333"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.00000000000000e0,2.00000000000000e0,"));
        assert_eq!(row.split(',').count(), 18);
    }
}
