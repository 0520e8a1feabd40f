use nalgebra::DVector;

use super::operators;
use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Density matrix over the 2^N product space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    /// Wraps a matrix after checking the density-operator invariants.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let rho = Self { matrix };
        rho.validate(1e-10, 1e-8)?;
        Ok(rho)
    }

    /// Wraps a matrix without validation.
    pub fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    /// All emitters in the ground state.
    pub fn ground(n: usize) -> Self {
        let d = operators::dimension(n);
        let mut m = CMatrix::zeros(d, d);
        m[(0, 0)] = C64::new(1.0, 0.0);
        Self { matrix: m }
    }

    /// Projector onto a normalized state vector.
    pub fn pure(state: &DVector<C64>) -> Result<Self> {
        let norm = state.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("state vector has zero norm".into()));
        }
        let psi = state / C64::new(norm, 0.0);
        Ok(Self { matrix: &psi * psi.adjoint() })
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

    /// Number of emitters, assuming a 2^N dimension.
    pub fn n_emitters(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Tr[op rho].
    pub fn expectation(&self, op: &CMatrix) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for k in 0..d {
                acc += op[(i, k)] * self.matrix[(k, i)];
            }
        }
        acc
    }

    /// Excited population of each emitter.
    pub fn populations(&self) -> Vec<f64> {
        let n = self.n_emitters();
        (0..n)
            .map(|i| (0..self.dim()).filter(|&k| operators::is_excited(n, i, k)).map(|k| self.matrix[(k, k)].re).sum())
            .collect()
    }

    /// Column-stacked vector of the matrix.
    pub fn to_vector(&self) -> DVector<C64> {
        DVector::from_column_slice(self.matrix.as_slice())
    }

    pub fn from_vector(v: &DVector<C64>) -> Self {
        let d = (v.len() as f64).sqrt().round() as usize;
        Self { matrix: CMatrix::from_column_slice(d, d, v.as_slice()) }
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let a = self.matrix.adjoint();
        (&self.matrix - a).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity and trace against `tol`, and positivity against
    /// `-pos_tol`.
    pub fn validate(&self, tol: f64, pos_tol: f64) -> Result<()> {
        if !self.matrix.is_square() || !self.dim().is_power_of_two() {
            return Err(Error::Shape(format!(
                "density matrix is {}x{}, expected 2^N square",
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::Numerical(format!("density matrix not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Numerical(format!("density matrix trace is {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -pos_tol {
            return Err(Error::Numerical(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// Largest absolute element difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}
