use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::state::StateVector;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(rho: DMatrix<C64>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::DimensionMismatch { expected: rho.nrows(), found: rho.ncols() });
        }
        let d = Self { rho };
        d.validate()?;
        Ok(d)
    }

    pub(crate) fn from_matrix_unchecked(rho: DMatrix<C64>) -> Self {
        Self { rho }
    }

    pub fn pure(state: &StateVector) -> Self {
        let v = DMatrix::from_column_slice(state.dim(), 1, state.amplitudes());
        Self { rho: &v * v.adjoint() }
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        Self { rho: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.rho[(i, j)]
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        crate::unitary::max_abs_diff(&self.rho, &self.rho.adjoint())
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.rho)
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// <ψ|ρ|ψ>
    pub fn fidelity_with_pure(&self, state: &StateVector) -> Result<f64> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.dim() });
        }
        let v = DMatrix::from_column_slice(state.dim(), 1, state.amplitudes());
        Ok((v.adjoint() * &self.rho * &v)[(0, 0)].re)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_defect();
        if h > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!("not hermitian (defect {h:e})")));
        }
        let t = self.trace();
        if (t - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!("trace {t} differs from 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// ½‖p − q‖₁ from the eigenvalues of p − q.
pub fn trace_distance(p: &DensityMatrix, q: &DensityMatrix) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: q.dim() });
    }
    let diff = &p.rho - &q.rho;
    Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>())
}
