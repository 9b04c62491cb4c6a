//! Orthonormal operator bases of Hilbert-Schmidt subspaces.
//!
//! A basis fixes the coordinates in which POVM effects and observables are
//! expressed; every coefficient vector in this crate is tagged with the
//! content hash of the basis it was computed against, so mixed-basis
//! arithmetic fails loudly instead of silently.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{fnv_init, fnv_u64, hs_inner, HermitianOperator};

/// Default tolerance on the Gram matrix deviating from the identity.
pub const DEFAULT_GRAM_TOL: f64 = 1e-10;

/// Default tolerance on span-membership projection residuals.
pub const DEFAULT_SPAN_TOL: f64 = 1e-10;

/// Above this many stored complex entries (`D * d^2`), tensor-product bases
/// keep their factor structure and materialize elements on demand.
const DENSE_ELEMENT_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone)]
enum ElementStore {
    Dense(Vec<HermitianOperator>),
    /// Tensor basis kept as factors; element `k` is the Kronecker product of
    /// factor elements under mixed-radix decomposition of `k`, first factor
    /// most significant.
    Kron(Vec<Arc<OperatorBasis>>),
}

/// An orthonormal basis `{B_k}` of a subspace of Hermitian d x d operators.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    dim: usize,
    len: usize,
    gram_tol: f64,
    hash: u64,
    store: ElementStore,
}

impl OperatorBasis {
    /// Validates pairwise orthonormality under the Hilbert-Schmidt inner
    /// product and wraps the elements.
    pub fn new(elements: Vec<HermitianOperator>, gram_tol: f64) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidOptions {
                reason: "basis needs at least one element".into(),
            });
        }
        let dim = elements[0].dim();
        for e in &elements {
            if e.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: e.dim(),
                });
            }
        }
        if elements.len() > dim * dim {
            return Err(Error::InvalidOptions {
                reason: format!(
                    "{} elements exceed the operator-space dimension {}",
                    elements.len(),
                    dim * dim
                ),
            });
        }
        let mut max_dev = 0.0_f64;
        for (i, a) in elements.iter().enumerate() {
            for (j, b) in elements.iter().enumerate().skip(i) {
                let g = hs_inner(a, b)?;
                let target = if i == j { 1.0 } else { 0.0 };
                max_dev = max_dev.max((g - target).abs());
            }
        }
        if max_dev > gram_tol {
            return Err(Error::NotOrthonormal {
                max_dev,
                tol: gram_tol,
            });
        }
        let hash = hash_dense(dim, &elements);
        Ok(Self {
            dim,
            len: elements.len(),
            gram_tol,
            hash,
            store: ElementStore::Dense(elements),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of elements D (the spanned dimension).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn gram_tol(&self) -> f64 {
        self.gram_tol
    }

    /// Content hash identifying this basis.
    pub fn content_hash(&self) -> u64 {
        self.hash
    }

    /// Materializes element `k`.
    pub fn element(&self, k: usize) -> HermitianOperator {
        assert!(k < self.len, "basis element index out of range");
        match &self.store {
            ElementStore::Dense(els) => els[k].clone(),
            ElementStore::Kron(factors) => {
                let mut idx = k;
                let mut radices = vec![0usize; factors.len()];
                for (slot, f) in radices.iter_mut().zip(factors.iter()).rev() {
                    *slot = idx % f.len();
                    idx /= f.len();
                }
                let mut out: Option<HermitianOperator> = None;
                for (f, &r) in factors.iter().zip(radices.iter()) {
                    let el = f.element(r);
                    out = Some(match out {
                        None => el,
                        Some(acc) => acc.kron(&el),
                    });
                }
                out.expect("kron store has at least one factor")
            }
        }
    }

    /// Direct slice access when elements are stored densely.
    pub fn dense_elements(&self) -> Option<&[HermitianOperator]> {
        match &self.store {
            ElementStore::Dense(els) => Some(els),
            ElementStore::Kron(_) => None,
        }
    }

    /// `sum_k coeffs_k B_k`.
    pub fn reconstruct(&self, coeffs: &DVector<f64>) -> Result<HermitianOperator> {
        if coeffs.len() != self.len {
            return Err(Error::LenMismatch {
                expected: self.len,
                got: coeffs.len(),
            });
        }
        let mut acc: DMatrix<Complex64> = DMatrix::zeros(self.dim, self.dim);
        match &self.store {
            ElementStore::Dense(els) => {
                for (el, &c) in els.iter().zip(coeffs.iter()) {
                    acc.zip_apply(el.entries(), |a, b| *a += b * c);
                }
            }
            ElementStore::Kron(_) => {
                for k in 0..self.len {
                    let el = self.element(k);
                    let c = coeffs[k];
                    acc.zip_apply(el.entries(), |a, b| *a += b * c);
                }
            }
        }
        Ok(HermitianOperator::from_matrix_unchecked(acc))
    }
}

fn hash_dense(dim: usize, elements: &[HermitianOperator]) -> u64 {
    let mut h = fnv_init();
    h = fnv_u64(h, dim as u64);
    h = fnv_u64(h, elements.len() as u64);
    for e in elements {
        h = fnv_u64(h, e.content_hash());
    }
    h
}

/// The orthonormal basis `{I/sqrt(2), X/sqrt(2), Z/sqrt(2)}` of the
/// single-qubit subspace spanned by the X/Z eigenstate POVM.
pub fn pauli_basis_xz() -> OperatorBasis {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let elements = vec![
        HermitianOperator::identity(2).scale(s),
        HermitianOperator::pauli_x().scale(s),
        HermitianOperator::pauli_z().scale(s),
    ];
    OperatorBasis::new(elements, DEFAULT_GRAM_TOL).expect("static basis is orthonormal")
}

/// Tensor product of two bases, first factor index-major. Orthonormality is
/// inherited exactly (`<A kron B, C kron D> = <A,C><B,D>`), so the Gram check
/// is not repeated; large products keep factor structure and materialize
/// elements lazily.
pub fn tensor_basis(a: &OperatorBasis, b: &OperatorBasis) -> OperatorBasis {
    let dim = a.dim * b.dim;
    let len = a.len * b.len;
    let gram_tol = a.gram_tol.max(b.gram_tol);

    // Flatten nested Kron factors so repeated tensoring stays shallow.
    let mut factors: Vec<Arc<OperatorBasis>> = Vec::new();
    for side in [a, b] {
        match &side.store {
            ElementStore::Kron(fs) => factors.extend(fs.iter().cloned()),
            ElementStore::Dense(_) => factors.push(Arc::new(side.clone())),
        }
    }

    if len * dim * dim <= DENSE_ELEMENT_LIMIT {
        let mut elements = Vec::with_capacity(len);
        let lazy = OperatorBasis {
            dim,
            len,
            gram_tol,
            hash: 0,
            store: ElementStore::Kron(factors),
        };
        for k in 0..len {
            elements.push(lazy.element(k));
        }
        let hash = hash_dense(dim, &elements);
        OperatorBasis {
            dim,
            len,
            gram_tol,
            hash,
            store: ElementStore::Dense(elements),
        }
    } else {
        let mut h = fnv_init();
        h = fnv_u64(h, dim as u64);
        h = fnv_u64(h, len as u64);
        h = fnv_u64(h, 0x6b726f6e); // "kron" marker
        for f in &factors {
            h = fnv_u64(h, f.hash);
        }
        OperatorBasis {
            dim,
            len,
            gram_tol,
            hash: h,
            store: ElementStore::Kron(factors),
        }
    }
}

/// N-fold tensor power of a basis.
pub fn tensor_basis_power(b: &OperatorBasis, n: usize) -> OperatorBasis {
    assert!(n >= 1, "tensor power needs n >= 1");
    let mut out = b.clone();
    for _ in 1..n {
        out = tensor_basis(&out, b);
    }
    out
}

/// Orthonormalizes the span of the given operators by twice-iterated
/// modified Gram-Schmidt in Hilbert-Schmidt space, dropping directions whose
/// residual falls below `drop_tol` relative to the largest input norm.
pub fn orthonormal_span_basis(
    ops: &[HermitianOperator],
    drop_tol: f64,
) -> Result<OperatorBasis> {
    if ops.is_empty() {
        return Err(Error::InvalidOptions {
            reason: "cannot build a basis from zero operators".into(),
        });
    }
    let dim = ops[0].dim();
    let scale = ops
        .iter()
        .map(|o| o.frobenius_norm())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let mut kept: Vec<HermitianOperator> = Vec::new();
    for op in ops {
        if op.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: op.dim(),
            });
        }
        let mut v = op.entries().clone();
        for _ in 0..2 {
            for b in &kept {
                let c = crate::operator::hs_inner_raw(b.entries(), &v);
                v.zip_apply(b.entries(), |x, y| *x -= y * c);
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > drop_tol * scale {
            v /= Complex64::new(norm, 0.0);
            kept.push(HermitianOperator::from_matrix(v)?);
        }
    }
    OperatorBasis::new(kept, DEFAULT_GRAM_TOL)
}

/// Coefficients `o_k = <O, B_k>` of an observable in the given basis, with
/// the default span tolerance.
pub fn observable_coeffs(
    obs: &HermitianOperator,
    basis: &OperatorBasis,
) -> Result<DVector<f64>> {
    observable_coeffs_with_tol(obs, basis, DEFAULT_SPAN_TOL)
}

/// As [`observable_coeffs`], with an explicit residual tolerance. Fails with
/// [`Error::ObservableOutsideSpan`] when the projection onto the basis span
/// leaves a residual above `tol`: the estimation task is infeasible for the
/// POVM the basis describes.
pub fn observable_coeffs_with_tol(
    obs: &HermitianOperator,
    basis: &OperatorBasis,
    tol: f64,
) -> Result<DVector<f64>> {
    if obs.dim() != basis.dim() {
        return Err(Error::DimMismatch {
            expected: basis.dim(),
            got: obs.dim(),
        });
    }
    let mut coeffs = DVector::zeros(basis.len());
    match &basis.store {
        ElementStore::Dense(els) => {
            for (k, el) in els.iter().enumerate() {
                coeffs[k] = hs_inner(el, obs)?;
            }
        }
        ElementStore::Kron(_) => {
            for k in 0..basis.len() {
                coeffs[k] = hs_inner(&basis.element(k), obs)?;
            }
        }
    }
    let projected = basis.reconstruct(&coeffs)?;
    let residual = obs.sub(&projected)?.frobenius_norm();
    if residual > tol {
        return Err(Error::ObservableOutsideSpan { residual });
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn xz_basis_gram_is_identity() {
        let b = pauli_basis_xz();
        assert_eq!(b.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let g = hs_inner(&b.element(i), &b.element(j)).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g, expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn first_element_overlaps_identity_as_sqrt_two() {
        let b = pauli_basis_xz();
        let id = HermitianOperator::identity(2);
        assert_abs_diff_eq!(
            hs_inner(&b.element(0), &id).unwrap(),
            std::f64::consts::SQRT_2,
            epsilon = 1e-14
        );
    }

    #[test]
    fn pauli_y_is_outside_xz_span() {
        let b = pauli_basis_xz();
        let y = HermitianOperator::pauli_y();
        match observable_coeffs(&y, &b) {
            Err(Error::ObservableOutsideSpan { residual }) => {
                // The projection of Y onto span{I, X, Z} vanishes, so the
                // residual is the full HS norm of Y.
                assert_abs_diff_eq!(residual, std::f64::consts::SQRT_2, epsilon = 1e-12);
            }
            other => panic!("expected ObservableOutsideSpan, got {other:?}"),
        }
    }

    #[test]
    fn z_coeffs_in_xz_basis() {
        let b = pauli_basis_xz();
        let o = observable_coeffs(&HermitianOperator::pauli_z(), &b).unwrap();
        assert_abs_diff_eq!(o[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(o[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(o[2], std::f64::consts::SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn identity_coeffs_in_xz_basis() {
        let b = pauli_basis_xz();
        let o = observable_coeffs(&HermitianOperator::identity(2), &b).unwrap();
        assert_abs_diff_eq!(o[0], std::f64::consts::SQRT_2, epsilon = 1e-14);
        assert_abs_diff_eq!(o[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(o[2], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn basis_expansion_roundtrips_operators_in_span() {
        let b = pauli_basis_xz();
        // a I + b X + c Z for a deterministic set of coefficients
        let a = HermitianOperator::identity(2).scale(0.37);
        let x = HermitianOperator::pauli_x().scale(-1.21);
        let z = HermitianOperator::pauli_z().scale(0.84);
        let op = a.add(&x).unwrap().add(&z).unwrap();
        let coeffs = observable_coeffs(&op, &b).unwrap();
        let rec = b.reconstruct(&coeffs).unwrap();
        assert!(op.sub(&rec).unwrap().max_abs_entry() < 1e-12);
    }

    #[test]
    fn tensor_basis_is_orthonormal_and_index_major() {
        let b = pauli_basis_xz();
        let bb = tensor_basis(&b, &b);
        assert_eq!(bb.len(), 9);
        assert_eq!(bb.dim(), 4);
        // Element (i, j) is B_i kron B_j with i major.
        let e5 = bb.element(5); // i = 1, j = 2 -> X/sqrt2 kron Z/sqrt2
        let expect = HermitianOperator::pauli_x()
            .kron(&HermitianOperator::pauli_z())
            .scale(0.5);
        assert!(e5.sub(&expect).unwrap().max_abs_entry() < 1e-14);
        for i in 0..9 {
            for j in i..9 {
                let g = hs_inner(&bb.element(i), &bb.element(j)).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(g, expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn span_orthonormalization_recovers_xz_span() {
        // I +- X and I +- Z span {I, X, Z}: three directions.
        let id = HermitianOperator::identity(2);
        let ops = vec![
            id.add(&HermitianOperator::pauli_x()).unwrap(),
            id.sub(&HermitianOperator::pauli_x()).unwrap(),
            id.add(&HermitianOperator::pauli_z()).unwrap(),
            id.sub(&HermitianOperator::pauli_z()).unwrap(),
        ];
        let basis = orthonormal_span_basis(&ops, 1e-9).unwrap();
        assert_eq!(basis.len(), 3);
        // Y must remain outside.
        assert!(observable_coeffs(&HermitianOperator::pauli_y(), &basis).is_err());
    }

    #[test]
    fn non_orthonormal_elements_are_rejected() {
        let els = vec![
            HermitianOperator::identity(2),
            HermitianOperator::pauli_x(),
        ];
        // Un-normalized: <I, I> = 2.
        assert!(matches!(
            OperatorBasis::new(els, 1e-10),
            Err(Error::NotOrthonormal { .. })
        ));
    }
}
