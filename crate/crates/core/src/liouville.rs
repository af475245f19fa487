//! Lindblad generators, stationary states and time propagation.
//!
//! The generator acts as
//! `ρ̇ = −i[H, ρ] + Σ_k γ_k (o_k ρ o_k† − ½{o_k†o_k, ρ})` with ħ = 1, so the
//! Hamiltonian is expressed as an angular frequency in the same units as the
//! rates. Superoperators act on column-stacked density matrices (see
//! [`crate::qops`]).

use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qops::{frobenius, CMatrix, Operator, SpaceLayout, I, ONE, ZERO};

pub type CVector = DVector<Complex64>;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;

/// One dissipation channel `γ D[o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Collapse {
    pub rate: f64,
    pub op: Operator,
}

/// Hamiltonian plus dissipation channels on a fixed layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    hamiltonian: Operator,
    collapses: Vec<Collapse>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, collapses: Vec<Collapse>) -> Result<Self> {
        let defect = hamiltonian.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        for (k, c) in collapses.iter().enumerate() {
            hamiltonian.check_layout(&c.op)?;
            if !(c.rate.is_finite() && c.rate >= 0.0) {
                return Err(Error::param(
                    &format!("collapse[{k}].rate"),
                    format!("must be finite and non-negative, got {}", c.rate),
                ));
            }
        }
        Ok(Self { hamiltonian, collapses })
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn collapses(&self) -> &[Collapse] {
        &self.collapses
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.hamiltonian.layout()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Total decay rate out of basis state `level`: `Σ_k γ_k ⟨level|o_k†o_k|level⟩`.
    pub fn decay_rate_from(&self, level: usize) -> Result<f64> {
        if level >= self.dim() {
            return Err(Error::IndexOutOfRange { index: level, bound: self.dim() });
        }
        Ok(self.collapses.iter().map(|c| c.rate * c.op.matrix().column(level).norm_squared()).sum())
    }
}

/// Hermitian, unit-trace, positive semidefinite state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: SpaceLayout,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validating constructor.
    pub fn new(layout: SpaceLayout, matrix: CMatrix) -> Result<Self> {
        let rho = Self::from_raw(layout, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_raw(layout: SpaceLayout, matrix: CMatrix) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "density matrix is {}x{}, layout needs {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { layout, matrix })
    }

    /// Projector onto a basis state.
    pub fn basis_state(layout: &SpaceLayout, index: usize) -> Result<Self> {
        let n = layout.total_dim();
        if index >= n {
            return Err(Error::IndexOutOfRange { index, bound: n });
        }
        let mut m = CMatrix::zeros(n, n);
        m[(index, index)] = ONE;
        Ok(Self { layout: layout.clone(), matrix: m })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let herm = frobenius(&(&self.matrix - self.matrix.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidParameter {
                name: "density matrix".into(),
                reason: format!("not hermitian (defect {herm:.3e})"),
            });
        }
        let tr = self.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidParameter {
                name: "density matrix".into(),
                reason: format!("trace {tr} differs from 1"),
            });
        }
        let lo = self.min_eigenvalue();
        if lo < -POSITIVITY_TOL {
            return Err(Error::InvalidParameter {
                name: "density matrix".into(),
                reason: format!("negative eigenvalue {lo:.3e}"),
            });
        }
        Ok(())
    }

    /// `Tr(op ρ)`.
    pub fn expect(&self, op: &Operator) -> Result<Complex64> {
        if op.layout() != &self.layout {
            return Err(Error::LayoutMismatch {
                left: op.layout().subsystem_dims().to_vec(),
                right: self.layout.subsystem_dims().to_vec(),
            });
        }
        Ok(trace_of_product(op.matrix(), &self.matrix))
    }

    /// `½ ‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let d = &self.matrix - &other.matrix;
        let h = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
        0.5 * h.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Reduced state of subsystem `slot`.
    pub fn partial_trace_keep(&self, slot: usize) -> Result<DensityMatrix> {
        let dims = self.layout.subsystem_dims();
        if slot >= dims.len() {
            return Err(Error::IndexOutOfRange { index: slot, bound: dims.len() });
        }
        let before: usize = dims[..slot].iter().product();
        let keep = dims[slot];
        let after: usize = dims[slot + 1..].iter().product();
        let mut out = CMatrix::zeros(keep, keep);
        for i in 0..keep {
            for j in 0..keep {
                let mut acc = ZERO;
                for b in 0..before {
                    for a in 0..after {
                        let r = (b * keep + i) * after + a;
                        let c = (b * keep + j) * after + a;
                        acc += self.matrix[(r, c)];
                    }
                }
                out[(i, j)] = acc;
            }
        }
        DensityMatrix::from_raw(SpaceLayout::single(keep)?, out)
    }

    pub fn stack(&self) -> CVector {
        stack(&self.matrix)
    }
}

pub(crate) fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    // Tr(AB) = Σ_ij A_ij B_ji
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Column-stack a square matrix.
pub fn stack(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`stack`].
pub fn unstack(v: &CVector) -> CMatrix {
    let n = (v.len() as f64).sqrt().round() as usize;
    assert_eq!(n * n, v.len(), "vector length is not a perfect square");
    CMatrix::from_column_slice(n, n, v.as_slice())
}

/// `−i[H, ρ] + Σ_k γ_k D[o_k]ρ` evaluated directly.
pub fn lindblad_rhs(model: &LindbladModel, rho: &CMatrix) -> Result<CMatrix> {
    let n = model.dim();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::InvalidDimension(format!("state is {}x{}, model is {n}x{n}", rho.nrows(), rho.ncols())));
    }
    let h = model.hamiltonian.matrix();
    let mut out = (h * rho - rho * h) * (-I);
    for c in &model.collapses {
        if c.rate == 0.0 {
            continue;
        }
        let o = c.op.matrix();
        let od = o.adjoint();
        let odo = &od * o;
        let d = o * rho * &od - (&odo * rho + rho * &odo) * Complex64::new(0.5, 0.0);
        out += d * Complex64::new(c.rate, 0.0);
    }
    Ok(out)
}

/// Matrix form of the generator acting on column-stacked states.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    layout: SpaceLayout,
    matrix: CMatrix,
}

impl Superoperator {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Hilbert-space dimension (the superoperator side is its square).
    pub fn hilbert_dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        unstack(&(&self.matrix * stack(rho)))
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.matrix)
    }

    /// All eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        to_faer(&self.matrix).eigenvalues().map_err(|_| Error::EigenFailure)
    }

    /// Eigenvalues and right eigenvectors (columns).
    pub fn eigen(&self) -> Result<(Vec<Complex64>, CMatrix)> {
        let e = to_faer(&self.matrix).eigen().map_err(|_| Error::EigenFailure)?;
        let n = self.matrix.nrows();
        let s = e.S().column_vector();
        let u = e.U();
        Ok(((0..n).map(|k| s[k]).collect(), CMatrix::from_fn(n, n, |i, j| u[(i, j)])))
    }
}

fn to_faer(m: &CMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn build_liouvillian(model: &LindbladModel) -> Superoperator {
    let n = model.dim();
    let id = CMatrix::identity(n, n);
    let h = model.hamiltonian.matrix();
    let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
    for c in &model.collapses {
        if c.rate == 0.0 {
            continue;
        }
        let o = c.op.matrix();
        let odo = o.adjoint() * o;
        let half = Complex64::new(0.5, 0.0);
        let d = o.map(|z| z.conj()).kronecker(o) - id.kronecker(&odo) * half - odo.transpose().kronecker(&id) * half;
        l += d * Complex64::new(c.rate, 0.0);
    }
    Superoperator { layout: model.layout().clone(), matrix: l }
}

/// Row vector `stack(I)†`, i.e. the trace functional on stacked states.
pub(crate) fn trace_row(n: usize) -> CVector {
    let mut v = CVector::zeros(n * n);
    for i in 0..n {
        v[i + i * n] = ONE;
    }
    v
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyStateOptions {
    /// Run the eigenvalue-based kernel-dimension check.
    pub check_kernel: bool,
    /// Required ratio between the second-smallest and smallest |eigenvalue|.
    pub gap_ratio: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { check_kernel: true, gap_ratio: 1e3 }
    }
}

pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    steady_state_with(l, SteadyStateOptions::default())
}

pub fn steady_state_with(l: &Superoperator, opts: SteadyStateOptions) -> Result<DensityMatrix> {
    solve_steady(l, None, opts)
}

/// Steady state solved in the rescaled basis `|i⟩ → scale[i] |i⟩`, for states
/// whose elements span many orders of magnitude (weakly excited modes).
/// Elements `ρ_ij ≈ scale[i]·scale[j]` are then resolved to relative rather
/// than absolute precision.
pub fn steady_state_graded(l: &Superoperator, scale: &[f64], opts: SteadyStateOptions) -> Result<DensityMatrix> {
    if scale.len() != l.hilbert_dim() {
        return Err(Error::InvalidDimension(format!(
            "{} scale entries for dimension {}",
            scale.len(),
            l.hilbert_dim()
        )));
    }
    if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::param("scale", "entries must be positive and finite"));
    }
    solve_steady(l, Some(scale), opts)
}

fn solve_steady(l: &Superoperator, scale: Option<&[f64]>, opts: SteadyStateOptions) -> Result<DensityMatrix> {
    let n = l.hilbert_dim();
    let norm = l.norm();
    if opts.check_kernel {
        check_kernel(l, norm, opts.gap_ratio)?;
    }
    let p: Vec<f64> = match scale {
        Some(s) => (0..n * n).map(|k| s[k % n] * s[k / n]).collect(),
        None => vec![1.0; n * n],
    };

    // Replace the ρ_00 equation by the trace condition.
    let tr = trace_row(n);
    let a = CMatrix::from_fn(n * n, n * n, |r, c| if r == 0 { tr[c] * p[c] } else { l.matrix[(r, c)] * (p[c] / p[r]) });
    let mut rhs = CVector::zeros(n * n);
    rhs[0] = ONE;
    let y = a.lu().solve(&rhs).ok_or(Error::NoStationaryState { residual: f64::INFINITY })?;
    let x = CVector::from_fn(n * n, |k, _| y[k] * p[k]);

    let residual = (&l.matrix * &x).norm();
    if !(residual <= 1e-10 * norm.max(1.0)) {
        return Err(Error::NoStationaryState { residual });
    }

    let raw = unstack(&x);
    let mut rho = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = rho.trace();
    rho /= tr;
    let correction = frobenius(&(&rho - &raw));
    if correction > 1e-8 {
        warn!("steady state hermitization/normalization changed it by {correction:.3e}");
    }
    DensityMatrix::from_raw(l.layout.clone(), rho)
}

fn check_kernel(l: &Superoperator, norm: f64, gap_ratio: f64) -> Result<()> {
    let mut mags: Vec<f64> = l.eigenvalues()?.iter().map(|z| z.norm()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let floor = 1e-13 * norm.max(1.0);
    let smallest = mags[0].max(floor);
    if mags[0] > 1e-10 * norm.max(1.0) {
        return Err(Error::NoStationaryState { residual: mags[0] });
    }
    let threshold = gap_ratio * smallest;
    let dimension = mags.iter().take_while(|&&m| m <= threshold).count();
    if dimension > 1 {
        return Err(Error::DegenerateKernel { dimension });
    }
    Ok(())
}

/// Precomputed generator for repeated propagation `exp(Lτ)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    l: Superoperator,
}

impl Propagator {
    pub fn new(model: &LindbladModel) -> Self {
        Self { l: build_liouvillian(model) }
    }

    pub fn from_superoperator(l: Superoperator) -> Self {
        Self { l }
    }

    pub fn superoperator(&self) -> &Superoperator {
        &self.l
    }

    /// `exp(Lτ)` as a dense matrix.
    pub fn exp(&self, tau: f64) -> Result<CMatrix> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::param("tau", format!("must be finite and >= 0, got {tau}")));
        }
        let n = self.l.matrix.nrows();
        if tau == 0.0 {
            return Ok(CMatrix::identity(n, n));
        }
        let m = exp_checked(&(&self.l.matrix * Complex64::new(tau, 0.0)))?;
        Ok(m)
    }

    /// Propagate an arbitrary (not necessarily physical) operator by `τ`.
    pub fn propagate(&self, x: &CMatrix, tau: f64) -> Result<CMatrix> {
        if tau == 0.0 {
            return Ok(x.clone());
        }
        Ok(unstack(&(self.exp(tau)? * stack(x))))
    }
}

fn exp_checked(m: &CMatrix) -> Result<CMatrix> {
    let e = m.exp();
    if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NotConverged("matrix exponential produced non-finite values".into()));
    }
    Ok(e)
}

/// `ρ(τ) = exp(Lτ) ρ0`, hermitized.
pub fn evolve(model: &LindbladModel, rho0: &DensityMatrix, tau: f64) -> Result<DensityMatrix> {
    if rho0.layout() != model.layout() {
        return Err(Error::LayoutMismatch {
            left: model.layout().subsystem_dims().to_vec(),
            right: rho0.layout().subsystem_dims().to_vec(),
        });
    }
    let p = Propagator::new(model);
    evolve_with(&p, rho0, tau)
}

pub fn evolve_with(p: &Propagator, rho0: &DensityMatrix, tau: f64) -> Result<DensityMatrix> {
    if !(tau >= 0.0) {
        return Err(Error::param("tau", format!("must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(rho0.clone());
    }
    let out = p.propagate(rho0.matrix(), tau)?;
    let herm = (&out + out.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::from_raw(rho0.layout().clone(), herm)
}
