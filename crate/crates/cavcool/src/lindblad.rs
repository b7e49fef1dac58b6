//! Full quantum master-equation simulation on a truncated
//! atom ⊗ phonon ⊗ cavity Fock space; the ground truth against which the
//! rate-equation layer is validated.
//!
//! Composite basis ordering is atom ⊗ phonon ⊗ cavity with the flat index
//! `(atom * n_b + n_phonon) * n_c + n_cavity`. Every evolution operator
//! (Hamiltonian, both jump operators) is real in this basis, so the
//! propagation kernel acts separately on the real and imaginary parts of
//! the density matrix, and the stationary solve works in a real basis of
//! Hermitian matrices instead of the twice-as-expensive complex
//! vectorization.

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigValsh, Factorize, Solve, UPLO};
use num_complex::Complex64;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::numfmt::push_float;
use crate::params::SystemParams;
use crate::rateeq::STATE_LABELS;

type C64 = Complex64;

/// Default cap on the vectorized Liouvillian dimension D².
pub const DEFAULT_LIOUVILLIAN_CAP: usize = 16384;

/// Top-Fock-level population above which truncated results are flagged as
/// untrusted.
pub const TRUNCATION_FLAG_THRESHOLD: f64 = 1e-3;

/// Trace drift that aborts a propagation as numerically unstable.
pub const TRACE_DRIFT_ABORT: f64 = 1e-6;

/// Truncation dimensions of the two bosonic modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockConfig {
    /// Phonon levels kept: |0⟩ … |n_b − 1⟩.
    pub n_b: usize,
    /// Cavity levels kept.
    pub n_c: usize,
    /// Maximum allowed D² for dense Liouvillian work.
    pub liouvillian_cap: usize,
}

impl FockConfig {
    pub fn new(n_b: usize, n_c: usize) -> Self {
        FockConfig {
            n_b,
            n_c,
            liouvillian_cap: DEFAULT_LIOUVILLIAN_CAP,
        }
    }

    /// Composite Hilbert-space dimension D = 2 · n_b · n_c.
    pub fn dim(&self) -> usize {
        2 * self.n_b * self.n_c
    }

    /// Dimension D² of the vectorized Liouvillian.
    pub fn liouvillian_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    /// Flat index of the basis state |atom, n_phonon, n_cavity⟩.
    pub fn index(&self, atom: usize, n_phonon: usize, n_cavity: usize) -> usize {
        (atom * self.n_b + n_phonon) * self.n_c + n_cavity
    }

    fn check(&self) -> Result<()> {
        if self.n_b < 2 || self.n_c < 2 {
            return Err(Error::InvalidParams(format!(
                "need n_b >= 2 and n_c >= 2, got ({}, {})",
                self.n_b, self.n_c
            )));
        }
        if self.liouvillian_dim() > self.liouvillian_cap {
            return Err(Error::DimensionCap {
                d2: self.liouvillian_dim(),
                cap: self.liouvillian_cap,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------
// sparse real operators for the propagation hot path

#[derive(Debug, Clone)]
struct SparseReal {
    dim: usize,
    indptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseReal {
    fn from_dense(a: &Array2<f64>) -> Self {
        let dim = a.nrows();
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        indptr.push(0);
        for i in 0..dim {
            for j in 0..dim {
                let v = a[[i, j]];
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            indptr.push(cols.len());
        }
        SparseReal { dim, indptr, cols, vals }
    }

    /// y += alpha · A · x (planes as row-major dim×dim slices).
    fn left_mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let y_row = &mut y[i * d..(i + 1) * d];
            for idx in self.indptr[i]..self.indptr[i + 1] {
                let v = alpha * self.vals[idx];
                let x_row = &x[self.cols[idx] * d..self.cols[idx] * d + d];
                for (yy, xx) in y_row.iter_mut().zip(x_row) {
                    *yy += v * xx;
                }
            }
        }
    }

    /// y += alpha · x · A.
    fn right_mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let d = self.dim;
        for (x_row, y_row) in x.chunks_exact(d).zip(y.chunks_exact_mut(d)) {
            for i in 0..d {
                let xv = alpha * x_row[i];
                for idx in self.indptr[i]..self.indptr[i + 1] {
                    y_row[self.cols[idx]] += self.vals[idx] * xv;
                }
            }
        }
    }

    /// y += alpha · x · Aᵀ.
    fn right_mul_transpose_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let d = self.dim;
        for (x_row, y_row) in x.chunks_exact(d).zip(y.chunks_exact_mut(d)) {
            for i in 0..d {
                let mut acc = 0.0;
                for idx in self.indptr[i]..self.indptr[i + 1] {
                    acc += self.vals[idx] * x_row[self.cols[idx]];
                }
                y_row[i] += alpha * acc;
            }
        }
    }
}

/// Sparse entry list of a (generally complex) observable.
#[derive(Debug, Clone)]
struct SparseObservable {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseObservable {
    fn from_dense(a: &Array2<C64>) -> Self {
        let mut entries = Vec::new();
        for ((i, j), v) in a.indexed_iter() {
            if v.norm_sqr() != 0.0 {
                entries.push((i, j, *v));
            }
        }
        SparseObservable { entries }
    }

    /// Re tr(A ρ) with ρ given as planes.
    fn expect(&self, re: &[f64], im: &[f64], d: usize) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, a)| a.re * re[j * d + i] - a.im * im[j * d + i])
            .sum()
    }
}

// ---------------------------------------------------------------------
// model construction

fn lowering(n: usize) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for k in 1..n {
        a[[k - 1, k]] = (k as f64).sqrt();
    }
    a
}

fn kron3(a: &Array2<f64>, b: &Array2<f64>, c: &Array2<f64>) -> Array2<f64> {
    ndarray::linalg::kron(&ndarray::linalg::kron(a, b), c)
}

fn to_complex(a: &Array2<f64>) -> Array2<C64> {
    a.mapv(|v| C64::new(v, 0.0))
}

/// Truncated operators, Hamiltonian, dissipators, and observables of the
/// driven atom-phonon-cavity system.
#[derive(Debug, Clone)]
pub struct FockModel {
    pub config: FockConfig,
    pub params: SystemParams,
    /// Interaction-picture Hamiltonian
    /// ν b†b + δ c†c + Ω/2 (σ⁻+σ⁺) + ηg (b+b†)(σ⁺c + σ⁻c†).
    pub hamiltonian: Array2<C64>,
    /// (rate, jump operator) pairs: (κ, c) and (Γ, σ⁻).
    pub collapse: Vec<(f64, Array2<C64>)>,
    /// b†b.
    pub num_phonon: Array2<C64>,
    /// c†c.
    pub num_cavity: Array2<C64>,
    /// σ⁺σ⁻.
    pub pop_excited: Array2<C64>,
    /// The sixteen coherence observables B_i Σ_j C_k in rate-equation
    /// state order (x202 … x333).
    pub coherence_ops: Vec<(&'static str, Array2<C64>)>,

    // fast mirrors for the propagation kernel
    h_sparse: SparseReal,
    jumps: Vec<(f64, SparseReal)>,
    /// Diagonal of κ c†c + Γ σ⁺σ⁻.
    decay_diag: Vec<f64>,
    diag_phonon: Vec<f64>,
    diag_cavity: Vec<f64>,
    diag_excited: Vec<f64>,
    coherence_sparse: Vec<SparseObservable>,
    omega_max: f64,
}

/// Assemble all operators on the composite space.
///
/// The node-position sign of the coupling is fixed to '+'; flipping it is
/// a basis change with no observable consequence (tested).
pub fn build_model(params: &SystemParams, config: &FockConfig) -> Result<FockModel> {
    build_model_signed(params, config, 1.0)
}

pub(crate) fn build_model_signed(
    params: &SystemParams,
    config: &FockConfig,
    coupling_sign: f64,
) -> Result<FockModel> {
    params.check()?;
    config.check()?;
    let (n_b, n_c) = (config.n_b, config.n_c);
    let d = config.dim();

    let id_a = Array2::<f64>::eye(2);
    let id_b = Array2::<f64>::eye(n_b);
    let id_c = Array2::<f64>::eye(n_c);
    let low_b = lowering(n_b);
    let low_c = lowering(n_c);
    let sm_a = lowering(2); // |0⟩⟨1|

    let b = kron3(&id_a, &low_b, &id_c);
    let c = kron3(&id_a, &id_b, &low_c);
    let sm = kron3(&sm_a, &id_b, &id_c);
    let sp = sm.t().to_owned();

    let num_b = b.t().dot(&b);
    let num_c = c.t().dot(&c);
    let num_e = sp.dot(&sm);

    let h_real = params.nu * &num_b
        + params.delta * &num_c
        + 0.5 * params.omega * (&sm + &sp)
        + coupling_sign * params.eta * params.g * (&b + &b.t()).dot(&(sp.dot(&c) + sm.dot(&c.t())));

    // Hermiticity of the assembled Hamiltonian
    let herm_defect = (&h_real - &h_real.t())
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if herm_defect > 1e-12 {
        return Err(Error::InvalidParams(format!(
            "assembled Hamiltonian not Hermitian (defect {herm_defect:.2e})"
        )));
    }

    // complex coherence observables B_i Σ_j C_k, i,k ∈ {2,3}, j ∈ {0..3}
    let i_unit = C64::new(0.0, 1.0);
    let b2 = to_complex(&(&b + &b.t()));
    let b3 = to_complex(&(&b - &b.t())).mapv(|v| i_unit * v);
    let c2 = to_complex(&(&c + &c.t()));
    let c3 = to_complex(&(&c - &c.t())).mapv(|v| i_unit * v);
    let sigmas: [Array2<C64>; 4] = [
        to_complex(&kron3(&id_a, &id_b, &id_c)),
        to_complex(&num_e),
        to_complex(&(&sm + &sp)),
        to_complex(&(&sm - &sp)).mapv(|v| i_unit * v),
    ];
    let mut coherence_ops = Vec::with_capacity(16);
    let mut label_iter = STATE_LABELS[1..].iter();
    for sigma in &sigmas {
        for (bi, ck) in [(&b2, &c2), (&b2, &c3), (&b3, &c2), (&b3, &c3)] {
            let label: &'static str = label_iter.next().expect("16 labels");
            coherence_ops.push((label, bi.dot(sigma).dot(ck)));
        }
    }
    let coherence_sparse = coherence_ops
        .iter()
        .map(|(_, op)| SparseObservable::from_dense(op))
        .collect();

    let mut decay_diag = vec![0.0; d];
    let mut diag_phonon = vec![0.0; d];
    let mut diag_cavity = vec![0.0; d];
    let mut diag_excited = vec![0.0; d];
    for atom in 0..2 {
        for nb in 0..n_b {
            for nc in 0..n_c {
                let i = config.index(atom, nb, nc);
                diag_phonon[i] = nb as f64;
                diag_cavity[i] = nc as f64;
                diag_excited[i] = atom as f64;
                decay_diag[i] = params.kappa * nc as f64 + params.gamma_atom * atom as f64;
            }
        }
    }

    Ok(FockModel {
        config: *config,
        params: *params,
        hamiltonian: to_complex(&h_real),
        collapse: vec![
            (params.kappa, to_complex(&c)),
            (params.gamma_atom, to_complex(&sm)),
        ],
        num_phonon: to_complex(&num_b),
        num_cavity: to_complex(&num_c),
        pop_excited: to_complex(&num_e),
        coherence_ops,
        h_sparse: SparseReal::from_dense(&h_real),
        jumps: vec![
            (params.kappa, SparseReal::from_dense(&c)),
            (params.gamma_atom, SparseReal::from_dense(&sm)),
        ],
        decay_diag,
        diag_phonon,
        diag_cavity,
        diag_excited,
        coherence_sparse,
        omega_max: params.omega_max(),
    })
}

impl FockModel {
    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    /// dρ/dt for the given (not necessarily Hermitian-normalized) ρ.
    pub fn liouvillian_action(&self, rho: &Array2<C64>) -> Array2<C64> {
        let d = self.dim();
        let mut planes = Planes::from_matrix(rho, d);
        let mut out = Planes::zeros(d);
        let mut work = vec![0.0; d * d];
        self.apply_liouvillian(&planes.re, &planes.im, &mut out.re, &mut out.im, &mut work);
        planes.re.copy_from_slice(&out.re);
        planes.im.copy_from_slice(&out.im);
        planes.to_matrix(d)
    }

    /// out = L(in) on split real/imaginary planes:
    /// d(Re ρ) = [H, Im ρ] + D(Re ρ), d(Im ρ) = −[H, Re ρ] + D(Im ρ)
    /// with D(x) = Σ rate·(a x aᵀ) − ½{V, x} and V the decay diagonal.
    fn apply_liouvillian(
        &self,
        re_in: &[f64],
        im_in: &[f64],
        re_out: &mut [f64],
        im_out: &mut [f64],
        work: &mut [f64],
    ) {
        let d = self.dim();
        re_out.fill(0.0);
        im_out.fill(0.0);

        self.h_sparse.left_mul_add(1.0, im_in, re_out);
        self.h_sparse.right_mul_add(-1.0, im_in, re_out);
        self.h_sparse.left_mul_add(-1.0, re_in, im_out);
        self.h_sparse.right_mul_add(1.0, re_in, im_out);

        for (x, y) in [(re_in, &mut *re_out), (im_in, &mut *im_out)] {
            for i in 0..d {
                let vi = 0.5 * self.decay_diag[i];
                let x_row = &x[i * d..(i + 1) * d];
                let y_row = &mut y[i * d..(i + 1) * d];
                for j in 0..d {
                    y_row[j] -= (vi + 0.5 * self.decay_diag[j]) * x_row[j];
                }
            }
            for (rate, a) in &self.jumps {
                work.fill(0.0);
                a.left_mul_add(1.0, x, work);
                a.right_mul_transpose_add(*rate, work, y);
            }
        }
    }
}

// ---------------------------------------------------------------------
// propagation

#[derive(Debug, Clone)]
struct Planes {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Planes {
    fn zeros(d: usize) -> Self {
        Planes { re: vec![0.0; d * d], im: vec![0.0; d * d] }
    }

    fn from_matrix(rho: &Array2<C64>, d: usize) -> Self {
        let mut p = Planes::zeros(d);
        for ((i, j), v) in rho.indexed_iter() {
            p.re[i * d + j] = v.re;
            p.im[i * d + j] = v.im;
        }
        p
    }

    fn to_matrix(&self, d: usize) -> Array2<C64> {
        Array2::from_shape_fn((d, d), |(i, j)| C64::new(self.re[i * d + j], self.im[i * d + j]))
    }
}

/// One observables sample along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    /// ⟨b†b⟩.
    pub mean_phonons: f64,
    /// ⟨σ⁺σ⁻⟩.
    pub pop_excited: f64,
    /// ⟨c†c⟩.
    pub mean_photons: f64,
    pub trace: f64,
    /// The sixteen x_ijk expectation values, when requested.
    pub coherences: Option<[f64; 16]>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Record every n-th step (the initial and final states are always
    /// recorded).
    pub sample_stride: usize,
    pub record_coherences: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { sample_stride: 1, record_coherences: false }
    }
}

/// Fixed-step RK4 propagator for the master equation. Every RK4 stage is
/// an exact trace-zero map, so the trace drifts only by rounding.
pub struct Propagator<'m> {
    model: &'m FockModel,
    rho: Planes,
    k: Planes,
    acc: Planes,
    tmp: Planes,
    work: Vec<f64>,
    dt: f64,
    steps_taken: u64,
}

impl<'m> Propagator<'m> {
    pub fn new(model: &'m FockModel, rho0: &Array2<C64>, dt: f64) -> Result<Self> {
        let d = model.dim();
        if rho0.nrows() != d || rho0.ncols() != d {
            return Err(Error::InvalidParams(format!(
                "rho0 must be {d}x{d}, got {}x{}",
                rho0.nrows(),
                rho0.ncols()
            )));
        }
        let max_dt = 0.01 / model.omega_max;
        if dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { dt, max_dt });
        }
        let trace: C64 = rho0.diag().iter().sum();
        if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-8 {
            return Err(Error::InvalidParams(format!(
                "rho0 must have unit trace, got {trace}"
            )));
        }
        let herm = rho0
            .indexed_iter()
            .fold(0.0f64, |a, ((i, j), v)| a.max((v - rho0[[j, i]].conj()).norm()));
        if herm > 1e-8 {
            return Err(Error::InvalidParams(format!(
                "rho0 must be Hermitian (defect {herm:.2e})"
            )));
        }
        Ok(Propagator {
            model,
            rho: Planes::from_matrix(rho0, d),
            k: Planes::zeros(d),
            acc: Planes::zeros(d),
            tmp: Planes::zeros(d),
            work: vec![0.0; d * d],
            dt,
            steps_taken: 0,
        })
    }

    pub fn t(&self) -> f64 {
        self.steps_taken as f64 * self.dt
    }

    pub fn step(&mut self) {
        let h = self.dt;
        let n = self.rho.re.len();
        let put = |dst: &mut Planes, rho: &Planes, k: &Planes, scale: f64| {
            for i in 0..n {
                dst.re[i] = rho.re[i] + scale * k.re[i];
                dst.im[i] = rho.im[i] + scale * k.im[i];
            }
        };

        self.model.apply_liouvillian(
            &self.rho.re, &self.rho.im, &mut self.k.re, &mut self.k.im, &mut self.work,
        );
        self.acc.re.copy_from_slice(&self.k.re);
        self.acc.im.copy_from_slice(&self.k.im);
        put(&mut self.tmp, &self.rho, &self.k, 0.5 * h);

        self.model.apply_liouvillian(
            &self.tmp.re, &self.tmp.im, &mut self.k.re, &mut self.k.im, &mut self.work,
        );
        for i in 0..n {
            self.acc.re[i] += 2.0 * self.k.re[i];
            self.acc.im[i] += 2.0 * self.k.im[i];
        }
        put(&mut self.tmp, &self.rho, &self.k, 0.5 * h);

        self.model.apply_liouvillian(
            &self.tmp.re, &self.tmp.im, &mut self.k.re, &mut self.k.im, &mut self.work,
        );
        for i in 0..n {
            self.acc.re[i] += 2.0 * self.k.re[i];
            self.acc.im[i] += 2.0 * self.k.im[i];
        }
        put(&mut self.tmp, &self.rho, &self.k, h);

        self.model.apply_liouvillian(
            &self.tmp.re, &self.tmp.im, &mut self.k.re, &mut self.k.im, &mut self.work,
        );
        let w = h / 6.0;
        for i in 0..n {
            self.rho.re[i] += w * (self.acc.re[i] + self.k.re[i]);
            self.rho.im[i] += w * (self.acc.im[i] + self.k.im[i]);
        }
        self.steps_taken += 1;
    }

    pub fn trace(&self) -> f64 {
        let d = self.model.dim();
        (0..d).map(|i| self.rho.re[i * d + i]).sum()
    }

    pub fn rho(&self) -> Array2<C64> {
        self.rho.to_matrix(self.model.dim())
    }

    /// ‖ρ − ρ†‖_∞ (entrywise).
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.model.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let dre = self.rho.re[i * d + j] - self.rho.re[j * d + i];
                let dim = self.rho.im[i * d + j] + self.rho.im[j * d + i];
                worst = worst.max((dre * dre + dim * dim).sqrt());
            }
        }
        worst
    }

    pub fn record(&self, with_coherences: bool) -> TrajectoryRecord {
        let d = self.model.dim();
        let diag = |w: &[f64]| -> f64 {
            (0..d).map(|i| w[i] * self.rho.re[i * d + i]).sum()
        };
        let coherences = with_coherences.then(|| {
            let mut x = [0.0; 16];
            for (xi, op) in x.iter_mut().zip(&self.model.coherence_sparse) {
                *xi = op.expect(&self.rho.re, &self.rho.im, d);
            }
            x
        });
        TrajectoryRecord {
            t: self.t(),
            mean_phonons: diag(&self.model.diag_phonon),
            pop_excited: diag(&self.model.diag_excited),
            mean_photons: diag(&self.model.diag_cavity),
            trace: self.trace(),
            coherences,
        }
    }
}

/// Propagate `rho0` to `t_final` recording observables.
///
/// The step is uniformly shrunk so an integer number of steps lands on
/// `t_final` exactly; aborts if the trace drifts beyond [`TRACE_DRIFT_ABORT`].
pub fn evolve(
    model: &FockModel,
    rho0: &Array2<C64>,
    t_final: f64,
    dt: f64,
    opts: EvolveOptions,
) -> Result<Vec<TrajectoryRecord>> {
    if !(t_final > 0.0) {
        return Err(Error::InvalidParams(format!(
            "t_final must be > 0, got {t_final}"
        )));
    }
    let steps = (t_final / dt).ceil().max(1.0) as u64;
    let h = t_final / steps as f64;
    let stride = opts.sample_stride.max(1) as u64;
    let mut prop = Propagator::new(model, rho0, h)?;
    let mut records = Vec::with_capacity((steps / stride + 2) as usize);
    records.push(prop.record(opts.record_coherences));
    for n in 1..=steps {
        prop.step();
        let drift = (prop.trace() - 1.0).abs();
        if drift > TRACE_DRIFT_ABORT {
            return Err(Error::IntegrationUnstable { t: prop.t(), drift });
        }
        if n % stride == 0 || n == steps {
            records.push(prop.record(opts.record_coherences));
        }
    }
    Ok(records)
}

/// Write a trajectory as CSV (`t,m,pop_e,n_cav` plus the sixteen x columns
/// when they were recorded).
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    records: &[TrajectoryRecord],
) -> io::Result<()> {
    let with_x = records.first().is_some_and(|r| r.coherences.is_some());
    let mut line = String::from("t,m,pop_e,n_cav");
    if with_x {
        for label in &STATE_LABELS[1..] {
            line.push(',');
            line.push_str(label);
        }
    }
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for r in records {
        line.clear();
        push_float(&mut line, r.t);
        for v in [r.mean_phonons, r.pop_excited, r.mean_photons] {
            line.push(',');
            push_float(&mut line, v);
        }
        if with_x {
            for v in r.coherences.as_ref().map(|x| x.as_slice()).unwrap_or(&[]) {
                line.push(',');
                push_float(&mut line, *v);
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// stationary state

/// Unique stationary density matrix of the master equation, from the
/// vectorized Liouvillian with one equation replaced by the trace-one
/// condition. Works in the real Hermitian coordinate basis
/// `[diag; √2 Re upper; √2 Im upper]`, valid because all evolution
/// operators are real.
pub fn steady_state(model: &FockModel) -> Result<Array2<C64>> {
    let p = &model.params;
    if p.kappa <= 0.0 || p.gamma_atom <= 0.0 {
        return Err(Error::DegenerateSteadyState(
            "both decay channels must be open (kappa > 0 and gamma_atom > 0)".into(),
        ));
    }
    if p.eta * p.g == 0.0 {
        return Err(Error::DegenerateSteadyState(
            "eta*g = 0 conserves the phonon number, so every phonon mixture is stationary".into(),
        ));
    }

    let d = model.dim();
    let n = d * d;
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .collect();
    let np = pairs.len();
    let sqrt_half = std::f64::consts::FRAC_1_SQRT_2;

    let pack = |re: &[f64], im: &[f64], out: &mut [f64]| {
        for i in 0..d {
            out[i] = re[i * d + i];
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            out[d + k] = (re[i * d + j] + re[j * d + i]) * sqrt_half;
            out[d + np + k] = (im[i * d + j] - im[j * d + i]) * sqrt_half;
        }
    };

    // row k of `transposed` holds the packed coordinates of L(basis_k),
    // i.e. `transposed` is the superoperator matrix transposed; rows are
    // contiguous to fill, and LAPACK solves the transposed system directly
    let mut transposed = Array2::<f64>::zeros((n, n));
    {
        let mut basis = Planes::zeros(d);
        let mut out = Planes::zeros(d);
        let mut work = vec![0.0; n];
        for k in 0..n {
            // (row, col, value, real-plane) entries of the k-th basis
            // element; the diagonal case writes its single entry twice
            let touched: [(usize, usize, f64, bool); 2] = if k < d {
                [(k, k, 1.0, true), (k, k, 1.0, true)]
            } else if k < d + np {
                let (i, j) = pairs[k - d];
                [(i, j, sqrt_half, true), (j, i, sqrt_half, true)]
            } else {
                let (i, j) = pairs[k - d - np];
                [(i, j, sqrt_half, false), (j, i, -sqrt_half, false)]
            };
            for &(i, j, v, real) in &touched {
                if real {
                    basis.re[i * d + j] = v;
                } else {
                    basis.im[i * d + j] = v;
                }
            }
            model.apply_liouvillian(&basis.re, &basis.im, &mut out.re, &mut out.im, &mut work);
            pack(
                &out.re,
                &out.im,
                transposed.row_mut(k).as_slice_mut().expect("contiguous row"),
            );
            for &(i, j, _, real) in &touched {
                if real {
                    basis.re[i * d + j] = 0.0;
                } else {
                    basis.im[i * d + j] = 0.0;
                }
            }
        }
    }

    // replace the first diagonal-coordinate equation by tr ρ = 1
    for k in 0..n {
        transposed[[k, 0]] = if k < d { 1.0 } else { 0.0 };
    }
    let mut rhs = Array1::<f64>::zeros(n);
    rhs[0] = 1.0;

    let factor = transposed
        .factorize()
        .map_err(|e| Error::SteadyStateNotFound(format!("LU factorization failed: {e}")))?;
    let mut coords = factor
        .solve_t(&rhs)
        .map_err(|e| Error::SteadyStateNotFound(format!("solve failed: {e}")))?;
    // one step of iterative refinement
    let resid = transposed.t().dot(&coords) - &rhs;
    if let Ok(correction) = factor.solve_t(&resid) {
        coords -= &correction;
    }

    // unpack and verify against the matrix-free Liouvillian
    let mut rho = Planes::zeros(d);
    for i in 0..d {
        rho.re[i * d + i] = coords[i];
    }
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let s = coords[d + k] * sqrt_half;
        let a = coords[d + np + k] * sqrt_half;
        rho.re[i * d + j] = s;
        rho.re[j * d + i] = s;
        rho.im[i * d + j] = a;
        rho.im[j * d + i] = -a;
    }
    let mut out = Planes::zeros(d);
    let mut work = vec![0.0; n];
    model.apply_liouvillian(&rho.re, &rho.im, &mut out.re, &mut out.im, &mut work);
    let residual = out
        .re
        .iter()
        .zip(&out.im)
        .fold(0.0f64, |acc, (r, i)| acc.max((r * r + i * i).sqrt()));
    if residual > 1e-10 {
        return Err(Error::SteadyStateNotFound(format!(
            "Liouvillian residual {residual:.3e} exceeds 1e-10 (degenerate or ill-conditioned)"
        )));
    }
    let trace: f64 = (0..d).map(|i| rho.re[i * d + i]).sum();
    if (trace - 1.0).abs() > 1e-10 {
        return Err(Error::SteadyStateNotFound(format!(
            "trace defect {:.3e}",
            trace - 1.0
        )));
    }

    let rho = rho.to_matrix(d);
    let eigs = rho.eigvalsh(UPLO::Lower)?;
    let min_eig = eigs.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if min_eig < -1e-8 {
        return Err(Error::SteadyStateNotFound(format!(
            "negative eigenvalue {min_eig:.3e} below -1e-8"
        )));
    }
    Ok(rho)
}

/// Re tr(op · ρ).
pub fn expectation(op: &Array2<C64>, rho: &Array2<C64>) -> f64 {
    op.dot(rho).diag().iter().map(|v| v.re).sum()
}

// ---------------------------------------------------------------------
// initial states and truncation monitoring

/// |atom, n_phonon, n_cavity⟩⟨…| as a density matrix.
pub fn fock_state(
    config: &FockConfig,
    excited: bool,
    n_phonon: usize,
    n_cavity: usize,
) -> Result<Array2<C64>> {
    if n_phonon >= config.n_b || n_cavity >= config.n_c {
        return Err(Error::InvalidParams(format!(
            "Fock state ({n_phonon}, {n_cavity}) outside truncation ({}, {})",
            config.n_b, config.n_c
        )));
    }
    let d = config.dim();
    let mut rho = Array2::zeros((d, d));
    let i = config.index(usize::from(excited), n_phonon, n_cavity);
    rho[[i, i]] = C64::new(1.0, 0.0);
    Ok(rho)
}

/// Atom ground ⊗ thermal phonons with the given mean occupation
/// (renormalized inside the truncation) ⊗ cavity vacuum.
pub fn thermal_phonon_state(config: &FockConfig, mean: f64) -> Result<Array2<C64>> {
    if !(mean >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "thermal mean occupation must be >= 0, got {mean}"
        )));
    }
    let ratio = mean / (1.0 + mean);
    let mut weights: Vec<f64> = (0..config.n_b).map(|n| ratio.powi(n as i32)).collect();
    let norm: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= norm;
    }
    let d = config.dim();
    let mut rho = Array2::zeros((d, d));
    for (n, w) in weights.iter().enumerate() {
        let i = config.index(0, n, 0);
        rho[[i, i]] = C64::new(*w, 0.0);
    }
    Ok(rho)
}

/// Populations of the highest kept phonon and cavity Fock levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    pub top_phonon: f64,
    pub top_cavity: f64,
    pub threshold: f64,
    /// Both top-level populations below the threshold; results from a
    /// flagged configuration are untrusted.
    pub ok: bool,
}

/// Report how much population sits on the edge of the truncated space.
/// Tiny negative populations from eigenvalue clipping are reported as zero.
pub fn truncation_check(model: &FockModel, rho: &Array2<C64>) -> TruncationReport {
    truncation_check_with_threshold(model, rho, TRUNCATION_FLAG_THRESHOLD)
}

pub fn truncation_check_with_threshold(
    model: &FockModel,
    rho: &Array2<C64>,
    threshold: f64,
) -> TruncationReport {
    let cfg = &model.config;
    let mut top_phonon = 0.0;
    let mut top_cavity = 0.0;
    for atom in 0..2 {
        for nc in 0..cfg.n_c {
            let i = cfg.index(atom, cfg.n_b - 1, nc);
            top_phonon += rho[[i, i]].re;
        }
        for nb in 0..cfg.n_b {
            let i = cfg.index(atom, nb, cfg.n_c - 1);
            top_cavity += rho[[i, i]].re;
        }
    }
    let top_phonon = top_phonon.max(0.0);
    let top_cavity = top_cavity.max(0.0);
    TruncationReport {
        top_phonon,
        top_cavity,
        threshold,
        ok: top_phonon < threshold && top_cavity < threshold,
    }
}
