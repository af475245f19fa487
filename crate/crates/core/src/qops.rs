//! Hilbert-space layouts and dense operator construction.
//!
//! Composite spaces use the Kronecker convention where the first listed
//! subsystem is the slowest-varying index: for layout `[d0, d1]` the basis
//! state `|i0⟩⊗|i1⟩` has flat index `i0 * d1 + i1`.
//!
//! Density matrices are vectorized by stacking columns, which is also the
//! native storage order of [`nalgebra::DMatrix`]. For a 2×2 matrix
//!
//! ```text
//!     ρ = | a  b |      vec(ρ) = (a, c, b, d)ᵀ
//!         | c  d |
//! ```
//!
//! and `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Ordered tensor-product structure of a Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpaceLayout {
    dims: Vec<usize>,
}

impl SpaceLayout {
    pub fn compose(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDimension("empty subsystem list".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidDimension(format!("subsystem {pos} has dimension 0")));
        }
        Ok(Self { dims: dims.to_vec() })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::compose(&[dim])
    }

    pub fn subsystem_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    /// Layout with `other`'s subsystems appended after ours.
    pub fn extend(&self, other: &SpaceLayout) -> SpaceLayout {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SpaceLayout { dims }
    }
}

/// Dense square complex matrix tagged with the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    layout: SpaceLayout,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(layout: SpaceLayout, matrix: CMatrix) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "matrix is {}x{}, layout needs {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { layout, matrix })
    }

    pub fn identity(layout: &SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self { layout: layout.clone(), matrix: CMatrix::identity(n, n) }
    }

    pub fn zeros(layout: &SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self { layout: layout.clone(), matrix: CMatrix::zeros(n, n) }
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

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.check_layout(other)?;
        Ok(Self { layout: self.layout.clone(), matrix: &self.matrix + &other.matrix })
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.check_layout(other)?;
        Ok(Self { layout: self.layout.clone(), matrix: &self.matrix - &other.matrix })
    }

    pub fn matmul(&self, other: &Operator) -> Result<Self> {
        self.check_layout(other)?;
        Ok(Self { layout: self.layout.clone(), matrix: &self.matrix * &other.matrix })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { layout: self.layout.clone(), matrix: &self.matrix * c }
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.check_layout(other)?;
        Ok(Self { layout: self.layout.clone(), matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix })
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.matrix)
    }

    /// Frobenius norm of `A - A†` relative to the norm of `A`.
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.frobenius_norm().max(f64::MIN_POSITIVE);
        frobenius(&(&self.matrix - self.matrix.adjoint())) / scale
    }

    /// Kronecker product; the result's layout lists `self`'s subsystems first.
    pub fn kron(&self, other: &Operator) -> Self {
        Self { layout: self.layout.extend(&other.layout), matrix: self.matrix.kronecker(&other.matrix) }
    }

    pub(crate) fn check_layout(&self, other: &Operator) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch {
                left: self.layout.subsystem_dims().to_vec(),
                right: other.layout.subsystem_dims().to_vec(),
            });
        }
        Ok(())
    }
}

pub(crate) fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|i⟩⟨j|` on a single subsystem of dimension `dim`.
pub fn transition(i: usize, j: usize, dim: usize) -> Result<Operator> {
    let layout = SpaceLayout::single(dim)?;
    if i >= dim || j >= dim {
        return Err(Error::IndexOutOfRange { index: i.max(j), bound: dim });
    }
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, j)] = ONE;
    Operator::new(layout, m)
}

/// Truncated bosonic annihilation operator on Fock levels `0..=n_max`.
pub fn annihilation(n_max: usize) -> Result<Operator> {
    if n_max < 1 {
        return Err(Error::InvalidDimension("Fock cutoff must be at least 1".into()));
    }
    let dim = n_max + 1;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Operator::new(SpaceLayout::single(dim)?, m)
}

/// Tensor `op` with identities on every other subsystem of `layout`.
pub fn embed(op: &Operator, slot: usize, layout: &SpaceLayout) -> Result<Operator> {
    let dims = layout.subsystem_dims();
    if slot >= dims.len() {
        return Err(Error::IndexOutOfRange { index: slot, bound: dims.len() });
    }
    if op.dim() != dims[slot] {
        return Err(Error::InvalidDimension(format!(
            "operator of dimension {} does not fit slot {slot} of dimension {}",
            op.dim(),
            dims[slot]
        )));
    }
    let before: usize = dims[..slot].iter().product();
    let after: usize = dims[slot + 1..].iter().product();
    let m = CMatrix::identity(before, before).kronecker(op.matrix()).kronecker(&CMatrix::identity(after, after));
    Operator::new(layout.clone(), m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn compose_dims() {
        assert_eq!(SpaceLayout::compose(&[3]).unwrap().total_dim(), 3);
        assert_eq!(SpaceLayout::compose(&[3, 4]).unwrap().total_dim(), 12);
        assert_eq!(SpaceLayout::compose(&[4, 4]).unwrap().total_dim(), 16);
        assert!(SpaceLayout::compose(&[]).is_err());
        assert!(SpaceLayout::compose(&[3, 0]).is_err());
    }

    #[test]
    fn transition_ops() {
        let p0 = transition(0, 0, 3).unwrap();
        assert_eq!(p0.matrix()[(0, 0)], ONE);
        assert_eq!(p0.matrix().iter().filter(|z| z.norm() > 0.0).count(), 1);

        let s20 = transition(2, 0, 3).unwrap();
        let s02 = transition(0, 2, 3).unwrap();
        assert_eq!(s20.matmul(&s02).unwrap(), transition(2, 2, 3).unwrap());

        let e2 = nalgebra::DVector::from_vec(vec![ZERO, ZERO, ONE]);
        let out = transition(1, 2, 3).unwrap().matrix() * e2;
        assert_eq!(out[1], ONE);
        assert_eq!(out[0] + out[2], ZERO);

        assert!(matches!(transition(3, 0, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn transition_adjoint_swaps_indices() {
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(transition(i, j, 4).unwrap().adjoint(), transition(j, i, 4).unwrap());
            }
        }
    }

    #[test]
    fn annihilation_matrix() {
        let s = annihilation(1).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.matrix()[(0, 1)], ONE);
        assert!(annihilation(0).is_err());

        let s = annihilation(3).unwrap();
        let n = s.adjoint().matmul(&s).unwrap();
        for k in 0..4 {
            assert!((n.matrix()[(k, k)].re - k as f64).abs() < 1e-14);
        }

        // [s, s†] is the identity except in the top Fock level.
        let c = s.commutator(&s.adjoint()).unwrap();
        for k in 0..3 {
            assert!((c.matrix()[(k, k)] - ONE).norm() < 1e-14);
        }
        assert!((c.matrix()[(3, 3)].re + 3.0).abs() < 1e-14);
    }

    #[test]
    fn embed_identity_and_ordering() {
        let layout = SpaceLayout::compose(&[3, 4]).unwrap();
        let id = embed(&Operator::identity(&SpaceLayout::single(3).unwrap()), 0, &layout).unwrap();
        assert_eq!(id, Operator::identity(&layout));

        let see = embed(&transition(2, 2, 3).unwrap(), 0, &layout).unwrap();
        // slot 0 is slowest: indices 8..12 carry the projector
        for k in 0..12 {
            let expect = if k >= 8 { 1.0 } else { 0.0 };
            assert_eq!(see.matrix()[(k, k)].re, expect);
        }

        let a = transition(2, 1, 3).unwrap();
        let s = annihilation(3).unwrap();
        let ea = embed(&a, 0, &layout).unwrap();
        let es = embed(&s, 1, &layout).unwrap();
        assert!(max_abs(ea.commutator(&es).unwrap().matrix()) == 0.0);
        let prod = ea.matmul(&es).unwrap();
        assert_eq!(prod.matrix(), a.kron(&s).matrix());
    }

    #[test]
    fn embed_errors() {
        let layout = SpaceLayout::compose(&[3, 4]).unwrap();
        assert!(embed(&transition(0, 0, 3).unwrap(), 1, &layout).is_err());
        assert!(embed(&transition(0, 0, 3).unwrap(), 2, &layout).is_err());
    }

    #[test]
    fn algebra_basics() {
        let layout = SpaceLayout::single(3).unwrap();
        let m = CMatrix::from_fn(3, 3, |i, j| Complex64::new(i as f64 + 0.5, j as f64 - 1.0));
        let a = Operator::new(layout.clone(), m).unwrap();
        assert_eq!(a.adjoint().adjoint(), a);
        assert_eq!(a.matmul(&Operator::identity(&layout)).unwrap(), a);
        let other = Operator::identity(&SpaceLayout::single(2).unwrap());
        assert!(matches!(a.add(&other), Err(Error::LayoutMismatch { .. })));
        let two_a = a.scale(Complex64::new(2.0, 0.0));
        assert_eq!(a.add(&a).unwrap(), two_a);
    }
}
