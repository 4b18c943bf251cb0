use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Unitarity tolerance for constructed and synthesized matrices.
pub const UNITARITY_TOL: f64 = 1e-10;

/// A square complex matrix of power-of-two dimension, unitary to within
/// [`UNITARITY_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    m: DMatrix<C64>,
}

impl UnitaryMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        if !m.nrows().is_power_of_two() {
            return Err(Error::NotPowerOfTwo(m.nrows()));
        }
        let d = unitarity_defect(&m);
        if !(d < UNITARITY_TOL) {
            return Err(Error::NotUnitary(d));
        }
        Ok(Self { m })
    }

    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn dagger(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn transpose(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    pub fn conj(&self) -> Self {
        Self { m: self.m.map(|z| z.conj()) }
    }

    /// self · other
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Self { m: &self.m * &other.m })
    }

    /// self ⊗ other; self acts on the more significant qubits.
    pub fn kron(&self, other: &Self) -> Self {
        Self { m: self.m.kronecker(&other.m) }
    }

    pub fn defect(&self) -> f64 {
        unitarity_defect(&self.m)
    }
}

/// max |M^dag M - I|
pub fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let g = m.adjoint() * m;
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// max |a_ij - b_ij|
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Frobenius distance min_λ ‖a − λ b‖ over all complex scalars λ.
pub fn best_scalar_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let bb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    if bb == 0.0 {
        return a.norm();
    }
    let ba: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let lambda = ba / bb;
    (a - b * lambda).norm()
}

/// Max-entry distance after removing the best global phase from `b`.
pub fn phase_aligned_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let ba: C64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if ba.norm() > 0.0 { ba / ba.norm() } else { C64::new(1.0, 0.0) };
    max_abs_diff(a, &(b * phase))
}

/// Closest unitary in Frobenius norm: W V^dag from the SVD M = W Σ V^dag.
pub fn polar_unitary(m: &DMatrix<C64>) -> DMatrix<C64> {
    let svd = m.clone().svd(true, true);
    let w = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    w * v_t
}
