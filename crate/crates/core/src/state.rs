//! Validated density matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::operator::{hermiticity_error, kron, trace, trace_of_product};
use crate::tolerance::TOLERANCES;
use crate::{CMatrix, Error, Result, C64};

/// A trace-one, Hermitian, positive-semidefinite matrix on `2^k` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let h = DMatrix::from_fn(n, n, |i, j| (m[[i, j]] + m[[j, i]].conj()) * 0.5);
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let (rows, cols) = matrix.dim();
        if rows != cols || rows == 0 || !rows.is_power_of_two() {
            return Err(Error::BadShape { rows, cols });
        }
        let herm = hermiticity_error(&matrix);
        if herm > TOLERANCES.state_hermitian {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = trace(&matrix);
        if (tr - C64::new(1.0, 0.0)).norm() > TOLERANCES.state_trace {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = min_eigenvalue(&matrix);
        if min < TOLERANCES.state_min_eigenvalue {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { matrix })
    }

    /// Pure state |psi><psi| from a normalized vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let n = psi.len();
        Self::new(CMatrix::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj()))
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

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> C64 {
        trace(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        trace_of_product(&self.matrix, &self.matrix).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// Expectation value Tr(rho A).
    pub fn expectation(&self, a: &CMatrix) -> Result<C64> {
        if a.dim() != self.matrix.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: a.nrows() });
        }
        Ok(trace_of_product(&self.matrix, a))
    }

    /// rho (x) sigma with `self` as the more significant factor.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { matrix: kron(&self.matrix, &other.matrix) }
    }

    /// The ancilla state |+><+|.
    pub fn plus() -> DensityMatrix {
        let h = C64::new(0.5, 0.0);
        DensityMatrix { matrix: ndarray::arr2(&[[h, h], [h, h]]) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_states() {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        assert!(DensityMatrix::new(ndarray::arr2(&[[one, z], [z, one]])).is_err());
        assert!(DensityMatrix::new(ndarray::arr2(&[[C64::new(1.5, 0.0), z], [z, C64::new(-0.5, 0.0)]])).is_err());
        assert!(DensityMatrix::new(ndarray::arr2(&[[C64::new(0.5, 0.0), one], [z, C64::new(0.5, 0.0)]])).is_err());
        assert!(DensityMatrix::new(CMatrix::zeros((3, 3))).is_err());
    }

    #[test]
    fn pure_and_plus() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho = DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap();
        let plus = DensityMatrix::plus();
        for (a, b) in rho.matrix().iter().zip(plus.matrix().iter()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!((plus.purity() - 1.0).abs() < 1e-15);
        assert_eq!(plus.tensor(&plus).dim(), 4);
    }
}
