//! Dense Hermitian operators and the Hilbert-Schmidt inner product.
//!
//! Everything downstream (effects, observables, basis elements, states)
//! is a [`HermitianOperator`]; the Hilbert-Schmidt inner product
//! `<A, B> = Tr(A^dagger B)` makes the space of Hermitian d x d matrices a
//! real inner-product space of dimension d^2.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Max-abs tolerance for `A == A^dagger` at construction.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// A dense d x d complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    entries: DMatrix<Complex64>,
}

impl HermitianOperator {
    /// Validates Hermiticity (max-abs deviation <= 1e-12) and wraps the
    /// matrix. The stored entries are exactly symmetrized so later algebra
    /// cannot amplify the admitted asymmetry.
    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        let dim = entries.nrows();
        if dim == 0 || entries.ncols() != dim {
            return Err(Error::DimMismatch {
                expected: dim.max(1),
                got: entries.ncols(),
            });
        }
        let mut max_asym = 0.0_f64;
        for i in 0..dim {
            for j in i..dim {
                let dev = (entries[(i, j)] - entries[(j, i)].conj()).norm();
                if dev > max_asym {
                    max_asym = dev;
                }
            }
        }
        if max_asym > HERMITICITY_TOL {
            return Err(Error::NotHermitian { max_asym });
        }
        let mut sym = entries;
        for i in 0..dim {
            sym[(i, i)] = Complex64::new(sym[(i, i)].re, 0.0);
            for j in (i + 1)..dim {
                let avg = (sym[(i, j)] + sym[(j, i)].conj()) * 0.5;
                sym[(i, j)] = avg;
                sym[(j, i)] = avg.conj();
            }
        }
        Ok(Self { dim, entries: sym })
    }

    /// Wraps a matrix already known to be Hermitian by construction.
    pub(crate) fn from_matrix_unchecked(entries: DMatrix<Complex64>) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self {
            dim: entries.nrows(),
            entries,
        }
    }

    /// Builds a real symmetric operator from an f64 matrix.
    pub fn from_real(entries: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(entries.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix_unchecked(DMatrix::identity(dim, dim))
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_matrix_unchecked(DMatrix::zeros(dim, dim))
    }

    /// Rank-one projector |psi><psi| onto a (not necessarily normalized)
    /// state vector.
    pub fn projector(ket: &[Complex64]) -> Self {
        let dim = ket.len();
        let norm_sq: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = ket[i] * ket[j].conj() / norm_sq;
            }
        }
        Self::from_matrix_unchecked(m)
    }

    pub fn pauli_x() -> Self {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        m[(1, 0)] = Complex64::new(1.0, 0.0);
        Self::from_matrix_unchecked(m)
    }

    pub fn pauli_y() -> Self {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(0.0, -1.0);
        m[(1, 0)] = Complex64::new(0.0, 1.0);
        Self::from_matrix_unchecked(m)
    }

    pub fn pauli_z() -> Self {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        m[(1, 1)] = Complex64::new(-1.0, 0.0);
        Self::from_matrix_unchecked(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    /// Trace; real for Hermitian input.
    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_matrix_unchecked(self.entries.map(|z| z * c))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self::from_matrix_unchecked(&self.entries + &other.entries))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self::from_matrix_unchecked(&self.entries - &other.entries))
    }

    /// Kronecker (tensor) product, self as the major factor.
    pub fn kron(&self, other: &Self) -> Self {
        Self::from_matrix_unchecked(self.entries.kronecker(&other.entries))
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("non-finite eigenvalue"));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Folds the entry bytes into an FNV-1a hash; used to give coefficient
    /// vectors a verifiable basis identity.
    pub fn content_hash(&self) -> u64 {
        let mut h = fnv_init();
        h = fnv_u64(h, self.dim as u64);
        for z in self.entries.iter() {
            h = fnv_u64(h, z.re.to_bits());
            h = fnv_u64(h, z.im.to_bits());
        }
        h
    }
}

pub(crate) fn fnv_init() -> u64 {
    0xcbf29ce484222325
}

pub(crate) fn fnv_u64(mut h: u64, v: u64) -> u64 {
    for byte in v.to_le_bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn check_same_dim(a: &HermitianOperator, b: &HermitianOperator) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    Ok(())
}

/// Hilbert-Schmidt inner product `Tr(a^dagger b)`.
///
/// Real for Hermitian arguments; the imaginary part is rounding noise and is
/// discarded after a debug assertion.
pub fn hs_inner(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    check_same_dim(a, b)?;
    // Tr(a^dagger b) = sum_ij conj(a_ij) b_ij.
    let mut re = 0.0_f64;
    let mut im = 0.0_f64;
    for (x, y) in a.entries.iter().zip(b.entries.iter()) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    debug_assert!(
        im.abs() <= 1e-12 * (1.0 + re.abs()),
        "Hermitian inner product has imaginary part {im:e}"
    );
    Ok(re)
}

/// `Tr(a^dagger b)` on raw matrices; used by hot loops that keep
/// accumulators outside the `HermitianOperator` wrapper.
pub(crate) fn hs_inner_raw(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let mut re = 0.0_f64;
    for (x, y) in a.iter().zip(b.iter()) {
        re += x.re * y.re + x.im * y.im;
    }
    re
}
