//! Density matrices and the Euclidean projection onto the spectrahedron.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::project_onto_simplex;
use crate::operator::HermitianOperator;

/// Tolerance on `Tr(rho) = 1`.
pub const TRACE_TOL: f64 = 1e-10;

/// Eigenvalue floor for positivity.
pub const PSD_EIG_FLOOR: f64 = -1e-10;

/// A positive semi-definite, trace-one Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    /// Validates trace one and positivity.
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::TraceNotOne { trace });
        }
        let min_eig = op.min_eigenvalue();
        if min_eig < PSD_EIG_FLOOR {
            return Err(Error::NotPsd { min_eig });
        }
        Ok(Self { op })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// Pure state |psi><psi| (the ket is normalized internally).
    pub fn pure(ket: &[Complex64]) -> Self {
        Self {
            op: HermitianOperator::projector(ket),
        }
    }

    /// Convex mixture of eigenvalues `weights` (projected onto the simplex)
    /// with the given orthonormal columns as eigenvectors.
    pub fn from_eigensystem(eigvecs: &DMatrix<Complex64>, weights: &[f64]) -> Self {
        let w = project_onto_simplex(weights);
        Self {
            op: recompose(eigvecs, &w),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        self.op.entries()
    }

    /// Number of eigenvalues above `threshold`.
    pub fn numerical_rank(&self, threshold: f64) -> usize {
        self.op
            .eigenvalues()
            .iter()
            .filter(|&&l| l > threshold)
            .count()
    }

    /// `Tr(rho A)`.
    pub fn expectation(&self, a: &HermitianOperator) -> Result<f64> {
        crate::operator::hs_inner(a, self.op())
    }
}

/// Euclidean (Frobenius) projection of a Hermitian matrix onto the set of
/// density matrices: eigendecompose, project the spectrum onto the
/// probability simplex, reassemble.
pub fn project_to_density(m: &HermitianOperator) -> DensityMatrix {
    let eig = m.entries().clone().symmetric_eigen();
    let weights: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let projected = project_onto_simplex(&weights);
    DensityMatrix {
        op: recompose(&eig.eigenvectors, &projected),
    }
}

fn recompose(u: &DMatrix<Complex64>, weights: &[f64]) -> HermitianOperator {
    let dim = u.nrows();
    let mut scaled = u.clone();
    for (k, &w) in weights.iter().enumerate() {
        scaled.column_mut(k).scale_mut(w);
    }
    let mut m = scaled * u.adjoint();
    // Exact re-Hermitization kills eigensolver rounding.
    for i in 0..dim {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..dim {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    HermitianOperator::from_matrix_unchecked(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn maximally_mixed_is_valid() {
        let rho = DensityMatrix::maximally_mixed(4);
        assert_abs_diff_eq!(rho.op().trace(), 1.0, epsilon = 1e-14);
        assert!(DensityMatrix::new(rho.op().clone()).is_ok());
    }

    #[test]
    fn trace_violation_is_rejected() {
        let op = HermitianOperator::identity(2);
        assert!(matches!(
            DensityMatrix::new(op),
            Err(Error::TraceNotOne { .. })
        ));
    }

    #[test]
    fn negative_operator_is_rejected() {
        let z = HermitianOperator::pauli_z();
        // (I + 1.5 Z)/2 has eigenvalues 1.25 and -0.25.
        let op = HermitianOperator::identity(2)
            .add(&z.scale(1.5))
            .unwrap()
            .scale(0.5);
        assert!(matches!(DensityMatrix::new(op), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn projection_fixes_valid_states() {
        let ket = [Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6)];
        let rho = DensityMatrix::pure(&ket);
        let proj = project_to_density(rho.op());
        let dev = proj.op().sub(rho.op()).unwrap().max_abs_entry();
        assert!(dev < 1e-12);
    }

    #[test]
    fn projection_output_is_always_a_state() {
        // A decidedly non-state Hermitian input.
        let m = HermitianOperator::pauli_z()
            .scale(3.0)
            .add(&HermitianOperator::pauli_x().scale(-1.2))
            .unwrap();
        let rho = project_to_density(&m);
        assert!(DensityMatrix::new(rho.op().clone()).is_ok());
    }

    #[test]
    fn projection_matches_hand_computed_qubit_case() {
        // M = diag(0.9, 0.3): simplex projection of (0.9, 0.3) moves both
        // down by 0.1 -> diag(0.8, 0.2).
        let m = HermitianOperator::from_real(DMatrix::from_diagonal(
            &DVector::from_vec(vec![0.9, 0.3]),
        ))
        .unwrap();
        let rho = project_to_density(&m);
        assert_abs_diff_eq!(rho.entries()[(0, 0)].re, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.entries()[(1, 1)].re, 0.2, epsilon = 1e-12);
    }
}
