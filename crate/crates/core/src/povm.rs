//! POVMs: validated effect lists with their coefficient matrix R.
//!
//! A POVM is an ordered list of positive semi-definite effects summing to
//! the identity. Its coefficient matrix `R` (one row per effect, one column
//! per basis element, `R_jk = <E_j, B_k>`) is the object every downstream
//! solve works with: feasibility of post-processing coefficients is
//! `R^T x = o`, and the inner quadratic program is governed by
//! `R^T diag(p)^-1 R`.
//!
//! Tensor-product POVMs above a size threshold keep their factor structure
//! and materialize effects and coefficient rows on demand, so the 6-7 qubit
//! range stays reachable without storing 4^N dense d x d matrices.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::{orthonormal_span_basis, tensor_basis, OperatorBasis, DEFAULT_SPAN_TOL};
use crate::error::{Error, Result};
use crate::operator::{hs_inner, hs_inner_raw, HermitianOperator};

/// Max-abs tolerance on `sum_j E_j = I`.
pub const POVM_SUM_TOL: f64 = 1e-10;

/// Eigenvalue floor for effect positivity.
pub const PSD_EIG_FLOOR: f64 = -1e-10;

/// Default cap on the effect count of tensor products.
pub const DEFAULT_TENSOR_CAP: usize = 10_000_000;

/// Above this many stored complex entries (`n * d^2`), tensor products stop
/// materializing dense effects.
const DENSE_EFFECT_LIMIT: usize = 1 << 21;

/// Above this many stored reals (`n * D`), tensor products stop
/// materializing the dense coefficient matrix and stream rows instead.
const DENSE_COEFF_LIMIT: usize = 1 << 18;

#[derive(Debug, Clone)]
enum Structure {
    /// Everything materialized; `effects_dense` and `coeffs_dense` are set.
    Explicit,
    /// Tensor product of the factor POVMs, first factor index-major.
    Kron(Vec<Arc<Povm>>),
    /// Depolarizing shift `E_j -> (1-eps) E_j + (eps/n) I` of `base`.
    Shifted { base: Arc<Povm>, eps: f64 },
}

/// A validated POVM together with its span basis and coefficient matrix.
#[derive(Debug, Clone)]
pub struct Povm {
    dim: usize,
    n_effects: usize,
    span_dim: usize,
    basis: Arc<OperatorBasis>,
    structure: Structure,
    effects_dense: Option<Vec<HermitianOperator>>,
    coeffs_dense: Option<DMatrix<f64>>,
    /// Coefficients of the identity in the basis; equals the column sums of
    /// R because the effects resolve the identity.
    identity_coeffs: DVector<f64>,
}

impl Povm {
    /// Validates and wraps an explicit effect list: positivity of every
    /// effect, resolution of the identity, span containment in `basis`, and
    /// full column rank of R (the basis must span exactly `span{E_j}`).
    pub fn new(effects: Vec<HermitianOperator>, basis: OperatorBasis) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidOptions {
                reason: "a POVM needs at least one effect".into(),
            });
        }
        let dim = basis.dim();
        for e in &effects {
            if e.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: e.dim(),
                });
            }
        }
        for e in &effects {
            let min_eig = e.min_eigenvalue();
            if min_eig < PSD_EIG_FLOOR {
                return Err(Error::NotPsd { min_eig });
            }
        }
        let mut sum = DMatrix::<Complex64>::zeros(dim, dim);
        for e in &effects {
            sum += e.entries();
        }
        let mut max_dev = 0.0_f64;
        for i in 0..dim {
            for j in 0..dim {
                let target = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                max_dev = max_dev.max((sum[(i, j)] - target).norm());
            }
        }
        if max_dev > POVM_SUM_TOL {
            return Err(Error::EffectSumNotIdentity { max_dev });
        }

        let coeffs = project_effects(&effects, &basis, DEFAULT_SPAN_TOL)?;
        let span_dim = basis.len();
        let rank = numerical_rank(&coeffs);
        if rank < span_dim {
            return Err(Error::RankDeficient {
                cond: f64::INFINITY,
            });
        }
        let identity_coeffs = coeffs.tr_mul(&DVector::from_element(effects.len(), 1.0));
        Ok(Self {
            dim,
            n_effects: effects.len(),
            span_dim,
            basis: Arc::new(basis),
            structure: Structure::Explicit,
            effects_dense: Some(effects),
            coeffs_dense: Some(coeffs),
            identity_coeffs,
        })
    }

    /// As [`Povm::new`], deriving the basis by orthonormalizing the span of
    /// the effects themselves.
    pub fn with_auto_basis(effects: Vec<HermitianOperator>) -> Result<Self> {
        let basis = orthonormal_span_basis(&effects, 1e-9)?;
        Self::new(effects, basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of effects n.
    pub fn len(&self) -> usize {
        self.n_effects
    }

    pub fn is_empty(&self) -> bool {
        self.n_effects == 0
    }

    /// Dimension D of the operator subspace spanned by the effects.
    pub fn span_dim(&self) -> usize {
        self.span_dim
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn basis_hash(&self) -> u64 {
        self.basis.content_hash()
    }

    /// Coefficients of the identity operator in the POVM basis.
    pub fn identity_coeffs(&self) -> &DVector<f64> {
        &self.identity_coeffs
    }

    /// Materializes effect `j`.
    pub fn effect(&self, j: usize) -> HermitianOperator {
        assert!(j < self.n_effects, "effect index out of range");
        if let Some(effects) = &self.effects_dense {
            return effects[j].clone();
        }
        match &self.structure {
            Structure::Explicit => unreachable!("explicit POVMs store dense effects"),
            Structure::Kron(factors) => {
                let mut idx = j;
                let mut radices = vec![0usize; factors.len()];
                for (slot, f) in radices.iter_mut().zip(factors.iter()).rev() {
                    *slot = idx % f.len();
                    idx /= f.len();
                }
                let mut out: Option<HermitianOperator> = None;
                for (f, &r) in factors.iter().zip(radices.iter()) {
                    let e = f.effect(r);
                    out = Some(match out {
                        None => e,
                        Some(acc) => acc.kron(&e),
                    });
                }
                out.expect("kron structure has at least one factor")
            }
            Structure::Shifted { base, eps } => {
                let e = base.effect(j).scale(1.0 - eps);
                let shift = HermitianOperator::identity(self.dim).scale(eps / self.n_effects as f64);
                e.add(&shift).expect("dims match by construction")
            }
        }
    }

    /// Direct slice access when effects are stored densely.
    pub fn dense_effects(&self) -> Option<&[HermitianOperator]> {
        self.effects_dense.as_deref()
    }

    /// The cached dense coefficient matrix, if this POVM stores one.
    pub fn coeff_matrix_dense(&self) -> Option<&DMatrix<f64>> {
        self.coeffs_dense.as_ref()
    }

    /// The full n x D coefficient matrix, materializing rows if needed.
    pub fn coeff_matrix_materialized(&self) -> DMatrix<f64> {
        if let Some(r) = &self.coeffs_dense {
            return r.clone();
        }
        let mut out = DMatrix::zeros(self.n_effects, self.span_dim);
        let mut row = DVector::zeros(self.span_dim);
        for j in 0..self.n_effects {
            self.coeff_row_into(j, &mut row);
            out.row_mut(j).copy_from(&row.transpose());
        }
        out
    }

    /// Writes row `j` of R into `out`.
    pub fn coeff_row_into(&self, j: usize, out: &mut DVector<f64>) {
        assert_eq!(out.len(), self.span_dim);
        if let Some(r) = &self.coeffs_dense {
            for k in 0..self.span_dim {
                out[k] = r[(j, k)];
            }
            return;
        }
        match &self.structure {
            Structure::Explicit => unreachable!("explicit POVMs store a dense R"),
            Structure::Kron(factors) => {
                let mut idx = j;
                let mut radices = vec![0usize; factors.len()];
                for (slot, f) in radices.iter_mut().zip(factors.iter()).rev() {
                    *slot = idx % f.len();
                    idx /= f.len();
                }
                // Iterated Kronecker product of the factor rows.
                let mut acc: Vec<f64> = vec![1.0];
                let mut factor_row = Vec::new();
                for (f, &r) in factors.iter().zip(radices.iter()) {
                    factor_row.clear();
                    factor_row.resize(f.span_dim, 0.0);
                    let mut tmp = DVector::zeros(f.span_dim);
                    f.coeff_row_into(r, &mut tmp);
                    factor_row.copy_from_slice(tmp.as_slice());
                    let mut next = Vec::with_capacity(acc.len() * factor_row.len());
                    for &x in &acc {
                        for &y in &factor_row {
                            next.push(x * y);
                        }
                    }
                    acc = next;
                }
                for (o, v) in out.iter_mut().zip(acc.iter()) {
                    *o = *v;
                }
            }
            Structure::Shifted { base, eps } => {
                base.coeff_row_into(j, out);
                let w = eps / self.n_effects as f64;
                for (o, i) in out.iter_mut().zip(self.identity_coeffs.iter()) {
                    *o = (1.0 - eps) * *o + w * i;
                }
            }
        }
    }

    /// `R^T x` (length D).
    pub fn rt_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n_effects);
        if let Some(r) = &self.coeffs_dense {
            return r.tr_mul(x);
        }
        let mut out = DVector::zeros(self.span_dim);
        let mut row = DVector::zeros(self.span_dim);
        for j in 0..self.n_effects {
            self.coeff_row_into(j, &mut row);
            out.axpy(x[j], &row, 1.0);
        }
        out
    }

    /// `R w` (length n).
    pub fn r_mul(&self, w: &DVector<f64>) -> DVector<f64> {
        assert_eq!(w.len(), self.span_dim);
        if let Some(r) = &self.coeffs_dense {
            return r * w;
        }
        let mut out = DVector::zeros(self.n_effects);
        let mut row = DVector::zeros(self.span_dim);
        for j in 0..self.n_effects {
            self.coeff_row_into(j, &mut row);
            out[j] = row.dot(w);
        }
        out
    }

    /// `sum_j weights_j R_j R_j^T` (D x D), the weighted Gram matrix of the
    /// coefficient rows.
    pub fn weighted_gram(&self, weights: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(weights.len(), self.n_effects);
        if let Some(r) = &self.coeffs_dense {
            let mut scaled = r.clone();
            for j in 0..self.n_effects {
                let s = weights[j].max(0.0).sqrt();
                scaled.row_mut(j).scale_mut(s);
            }
            // All weights are nonnegative in every call site (probabilities
            // or inverse probabilities), so sqrt scaling is exact.
            return scaled.tr_mul(&scaled);
        }
        let mut out = DMatrix::zeros(self.span_dim, self.span_dim);
        let mut row = DVector::zeros(self.span_dim);
        for j in 0..self.n_effects {
            self.coeff_row_into(j, &mut row);
            out.ger(weights[j], &row, &row, 1.0);
        }
        out
    }

    /// Outcome probabilities `p_j = Tr(rho E_j)` for a raw Hermitian matrix
    /// (no clamping; callers on the public path go through
    /// [`crate::frame::probabilities`]).
    pub(crate) fn probabilities_raw(&self, rho: &DMatrix<Complex64>) -> DVector<f64> {
        if let Some(effects) = &self.effects_dense {
            return DVector::from_iterator(
                self.n_effects,
                effects.iter().map(|e| hs_inner_raw(e.entries(), rho)),
            );
        }
        match &self.structure {
            Structure::Explicit => unreachable!(),
            Structure::Kron(_) => DVector::from_iterator(
                self.n_effects,
                (0..self.n_effects).map(|j| hs_inner_raw(self.effect(j).entries(), rho)),
            ),
            Structure::Shifted { base, eps } => {
                let mut p = base.probabilities_raw(rho);
                let tr: f64 = (0..self.dim).map(|i| rho[(i, i)].re).sum();
                let shift = eps / self.n_effects as f64 * tr;
                p.apply(|v| *v = (1.0 - eps) * *v + shift);
                p
            }
        }
    }

    /// `sum_j w_j E_j` as a Hermitian operator.
    pub fn weighted_effect_sum(&self, w: &DVector<f64>) -> HermitianOperator {
        assert_eq!(w.len(), self.n_effects);
        if let Some(effects) = &self.effects_dense {
            let mut acc = DMatrix::<Complex64>::zeros(self.dim, self.dim);
            for (e, &c) in effects.iter().zip(w.iter()) {
                acc.zip_apply(e.entries(), |a, b| *a += b * c);
            }
            return HermitianOperator::from_matrix_unchecked(acc);
        }
        match &self.structure {
            Structure::Explicit => unreachable!(),
            Structure::Kron(_) => {
                let mut acc = DMatrix::<Complex64>::zeros(self.dim, self.dim);
                for j in 0..self.n_effects {
                    let e = self.effect(j);
                    acc.zip_apply(e.entries(), |a, b| *a += b * w[j]);
                }
                HermitianOperator::from_matrix_unchecked(acc)
            }
            Structure::Shifted { base, eps } => {
                let inner = base.weighted_effect_sum(w).scale(1.0 - eps);
                let total: f64 = w.iter().sum();
                let shift = HermitianOperator::identity(self.dim)
                    .scale(eps / self.n_effects as f64 * total);
                inner.add(&shift).expect("dims match")
            }
        }
    }

    /// Depolarizing shift `E_j -> (1-eps) E_j + (eps/n) I`. Stacked shifts
    /// flatten into a single equivalent one.
    pub(crate) fn regularized(&self, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::EpsOutOfRange { eps });
        }
        if eps == 0.0 {
            return Ok(self.clone());
        }
        let (base, eps_total) = match &self.structure {
            Structure::Shifted { base, eps: prior } => {
                (Arc::clone(base), 1.0 - (1.0 - prior) * (1.0 - eps))
            }
            _ => (Arc::new(self.clone()), eps),
        };
        let n = self.n_effects;
        let w = eps_total / n as f64;
        let effects_dense = base.effects_dense.as_ref().map(|effects| {
            let shift = HermitianOperator::identity(self.dim).scale(w);
            effects
                .iter()
                .map(|e| e.scale(1.0 - eps_total).add(&shift).expect("same dim"))
                .collect::<Vec<_>>()
        });
        let coeffs_dense = base.coeffs_dense.as_ref().map(|r| {
            let mut out = r.scale(1.0 - eps_total);
            for j in 0..n {
                for k in 0..self.span_dim {
                    out[(j, k)] += w * self.identity_coeffs[k];
                }
            }
            out
        });
        let structure = if effects_dense.is_some() && coeffs_dense.is_some() {
            Structure::Explicit
        } else {
            Structure::Shifted {
                base,
                eps: eps_total,
            }
        };
        Ok(Self {
            dim: self.dim,
            n_effects: n,
            span_dim: self.span_dim,
            basis: Arc::clone(&self.basis),
            structure,
            effects_dense,
            coeffs_dense,
            identity_coeffs: self.identity_coeffs.clone(),
        })
    }

    /// Sum of all effects; identity for a valid POVM.
    pub fn effect_sum(&self) -> HermitianOperator {
        self.weighted_effect_sum(&DVector::from_element(self.n_effects, 1.0))
    }
}

/// The 4-effect single-qubit POVM built from the X and Z eigenstates,
/// normalized so the effects resolve the identity, in the fixed order
/// `[ (I+X)/4, (I-X)/4, (I+Z)/4, (I-Z)/4 ]`.
pub fn build_xz_povm() -> Povm {
    let id = HermitianOperator::identity(2);
    let x = HermitianOperator::pauli_x();
    let z = HermitianOperator::pauli_z();
    let effects = vec![
        id.add(&x).unwrap().scale(0.25),
        id.sub(&x).unwrap().scale(0.25),
        id.add(&z).unwrap().scale(0.25),
        id.sub(&z).unwrap().scale(0.25),
    ];
    Povm::new(effects, crate::basis::pauli_basis_xz()).expect("static POVM is valid")
}

/// Tensor product of two POVMs with the default effect-count cap.
pub fn tensor_povm(a: &Povm, b: &Povm) -> Result<Povm> {
    tensor_povm_with_cap(a, b, DEFAULT_TENSOR_CAP)
}

/// Tensor product of two POVMs, `a`-index major. The resulting coefficient
/// matrix is the Kronecker product of the factors' matrices in the tensor
/// basis; validity (positivity, resolution of identity, full rank) is
/// inherited from the validated factors. Large products keep factor
/// structure and materialize effects and rows on demand.
pub fn tensor_povm_with_cap(a: &Povm, b: &Povm, cap: usize) -> Result<Povm> {
    let count = a.len() as u128 * b.len() as u128;
    if count > cap as u128 {
        return Err(Error::EffectCountOverflow { count, cap });
    }
    let n = a.len() * b.len();
    let dim = a.dim() * b.dim();
    let span_dim = a.span_dim() * b.span_dim();
    let basis = tensor_basis(a.basis(), b.basis());

    let mut factors: Vec<Arc<Povm>> = Vec::new();
    for side in [a, b] {
        match &side.structure {
            Structure::Kron(fs) => factors.extend(fs.iter().cloned()),
            _ => factors.push(Arc::new(side.clone())),
        }
    }
    let identity_coeffs = kron_vec(&a.identity_coeffs, &b.identity_coeffs);

    let mut povm = Povm {
        dim,
        n_effects: n,
        span_dim,
        basis: Arc::new(basis),
        structure: Structure::Kron(factors),
        effects_dense: None,
        coeffs_dense: None,
        identity_coeffs,
    };
    if n * dim * dim <= DENSE_EFFECT_LIMIT {
        let effects: Vec<HermitianOperator> = (0..n).map(|j| povm.effect(j)).collect();
        povm.effects_dense = Some(effects);
    }
    if n * span_dim <= DENSE_COEFF_LIMIT {
        povm.coeffs_dense = Some(povm.coeff_matrix_materialized());
    }
    Ok(povm)
}

/// N-fold tensor power of a POVM.
pub fn tensor_povm_power(p: &Povm, n_factors: usize, cap: usize) -> Result<Povm> {
    assert!(n_factors >= 1, "tensor power needs n >= 1");
    let mut out = p.clone();
    for _ in 1..n_factors {
        out = tensor_povm_with_cap(&out, p, cap)?;
    }
    Ok(out)
}

/// Coefficient matrix `R_jk = <E_j, B_k>` of a POVM's effects against an
/// arbitrary basis spanning them. Every row must reconstruct its effect to
/// within `DEFAULT_SPAN_TOL`, otherwise the projection is lossy and the
/// matrix would silently misrepresent the POVM.
pub fn coefficient_matrix(povm: &Povm, basis: &OperatorBasis) -> Result<DMatrix<f64>> {
    if povm.dim() != basis.dim() {
        return Err(Error::DimMismatch {
            expected: povm.dim(),
            got: basis.dim(),
        });
    }
    if let Some(effects) = povm.dense_effects() {
        project_effects(effects, basis, DEFAULT_SPAN_TOL)
    } else {
        let effects: Vec<HermitianOperator> =
            (0..povm.len()).map(|j| povm.effect(j)).collect();
        project_effects(&effects, basis, DEFAULT_SPAN_TOL)
    }
}

fn project_effects(
    effects: &[HermitianOperator],
    basis: &OperatorBasis,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let n = effects.len();
    let d_span = basis.len();
    let mut r = DMatrix::zeros(n, d_span);
    for (j, e) in effects.iter().enumerate() {
        let mut coeffs = DVector::zeros(d_span);
        if let Some(els) = basis.dense_elements() {
            for (k, b) in els.iter().enumerate() {
                coeffs[k] = hs_inner(b, e)?;
            }
        } else {
            for k in 0..d_span {
                coeffs[k] = hs_inner(&basis.element(k), e)?;
            }
        }
        let rec = basis.reconstruct(&coeffs)?;
        let residual = e.sub(&rec)?.frobenius_norm();
        if residual > tol {
            return Err(Error::EffectOutsideSpan { index: j, residual });
        }
        r.row_mut(j).copy_from(&coeffs.transpose());
    }
    Ok(r)
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = smax * m.nrows().max(m.ncols()) as f64 * f64::EPSILON;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

fn kron_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() * b.len());
    let mut idx = 0;
    for &x in a.iter() {
        for &y in b.iter() {
            out[idx] = x * y;
            idx += 1;
        }
    }
    out
}
