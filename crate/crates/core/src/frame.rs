//! Reconstruction coefficients, dual frames and the variance functional.
//!
//! Fixing a POVM and an observable `O` in its span, every vector `x` with
//! `sum_j x_j E_j = O` (equivalently `R^T x = o`) gives an unbiased
//! estimator of `Tr(O rho)` from outcome frequencies. This module provides:
//!
//! - the canonical (Moore-Penrose, minimum-norm) coefficients,
//! - the state-optimal coefficients `x* = P^-1 R (R^T P^-1 R)^-1 o`, which
//!   minimize `sum_j p_j x_j^2` subject to feasibility,
//! - an independent dense-KKT quadratic-program oracle for the same
//!   minimization (used to cross-check the closed form),
//! - the variance functional and the shadow-norm bound,
//! - the depolarizing regularization that keeps all outcome probabilities
//!   strictly positive,
//! - dual-frame construction from any valid pseudo-inverse of R.

use nalgebra::{DMatrix, DVector};

use crate::basis::OperatorBasis;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::operator::HermitianOperator;
use crate::povm::Povm;
use crate::state::DensityMatrix;

/// Feasibility budget on `|R^T x - o|_2` carried by every coefficient
/// vector; the constraint is the unbiasedness guarantee, so violations
/// invalidate every downstream number.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Probabilities at or below this floor make the weighted inverse
/// meaningless; regularize first.
pub const P_FLOOR: f64 = 1e-14;

/// Default depolarizing strength used when a probability hits the floor.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Condition-number guard for the normal-equation solves.
pub const COND_LIMIT: f64 = 1e12;

/// Tolerance on `R^T L = I` for pseudo-inverse validation.
pub const PSEUDO_INVERSE_TOL: f64 = 1e-8;

/// Outcome probabilities of a POVM on a state. Always derived from a state
/// (`p_j = Tr(rho E_j)`); free probability vectors do not correspond to
/// quantum states in general and are deliberately unconstructible.
#[derive(Debug, Clone)]
pub struct ProbabilityVector {
    values: DVector<f64>,
    state: DensityMatrix,
}

impl ProbabilityVector {
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn source_state(&self) -> &DensityMatrix {
        &self.state
    }
}

/// `p_j = Tr(rho E_j)`. Rounding negatives in `[-1e-10, 0)` are clamped to
/// zero and the vector renormalized.
pub fn probabilities(rho: &DensityMatrix, povm: &Povm) -> Result<ProbabilityVector> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimMismatch {
            expected: povm.dim(),
            got: rho.dim(),
        });
    }
    let mut p = povm.probabilities_raw(rho.entries());
    for v in p.iter_mut() {
        debug_assert!(*v >= -1e-10, "probability {v} below the PSD floor");
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = compensated_sum(p.iter().copied());
    debug_assert!((total - 1.0).abs() < 1e-9, "probabilities sum to {total}");
    p /= total;
    Ok(ProbabilityVector {
        values: p,
        state: rho.clone(),
    })
}

/// Post-processing coefficients, tagged with the identity of the basis the
/// feasibility constraint was expressed in.
#[derive(Debug, Clone)]
pub struct CoefficientVector {
    values: DVector<f64>,
    basis_hash: u64,
    residual: f64,
}

impl CoefficientVector {
    /// Wraps raw coefficients after verifying feasibility `R^T x = o`
    /// against the given POVM and observable coefficients.
    pub fn new(values: DVector<f64>, povm: &Povm, obs_coeffs: &DVector<f64>) -> Result<Self> {
        if values.len() != povm.len() {
            return Err(Error::LenMismatch {
                expected: povm.len(),
                got: values.len(),
            });
        }
        let residual = (povm.rt_mul(&values) - obs_coeffs).norm();
        if residual > FEASIBILITY_TOL {
            return Err(Error::Infeasible { residual });
        }
        Ok(Self {
            values,
            basis_hash: povm.basis_hash(),
            residual,
        })
    }

    pub(crate) fn from_parts(values: DVector<f64>, basis_hash: u64, residual: f64) -> Self {
        Self {
            values,
            basis_hash,
            residual,
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn basis_hash(&self) -> u64 {
        self.basis_hash
    }

    /// Boundary re-check: the vector must have been produced against the
    /// same basis and still satisfy its stored feasibility budget.
    pub fn check_against(&self, povm: &Povm) -> Result<()> {
        if self.basis_hash != povm.basis_hash() {
            return Err(Error::BasisMismatch);
        }
        if self.values.len() != povm.len() {
            return Err(Error::LenMismatch {
                expected: povm.len(),
                got: self.values.len(),
            });
        }
        if self.residual > FEASIBILITY_TOL {
            return Err(Error::Infeasible {
                residual: self.residual,
            });
        }
        Ok(())
    }
}

/// Which pseudo-inverse a dual frame came from.
#[derive(Debug, Clone)]
pub enum DualFrameSource {
    Canonical,
    StateDependent(DensityMatrix),
}

/// Operators `eta_j = sum_k L_jk B_k` for a valid pseudo-inverse `L` of R;
/// they satisfy the resolution identity `A = sum_j <E_j, A> eta_j` on the
/// span.
#[derive(Debug, Clone)]
pub struct DualFrame {
    elements: Vec<HermitianOperator>,
    source: DualFrameSource,
}

impl DualFrame {
    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn source(&self) -> &DualFrameSource {
        &self.source
    }
}

/// Solves the SPD system `gram w = rhs` by Cholesky with a cheap
/// condition-number guard (the squared diagonal ratio of the factor lower
/// bounds the true condition number).
fn guarded_spd_solve(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = gram.clone().cholesky().ok_or(Error::RankDeficient {
        cond: f64::INFINITY,
    })?;
    let l = chol.l_dirty();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0_f64;
    for i in 0..gram.nrows() {
        let d = l[(i, i)];
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let cond = (dmax / dmin).powi(2);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::RankDeficient { cond });
    }
    Ok(chol.solve(rhs))
}

/// Minimum-Euclidean-norm feasible coefficients
/// `x_MP = R (R^T R)^-1 o`, the canonical (Moore-Penrose) reconstruction.
pub fn canonical_coefficients(povm: &Povm, obs_coeffs: &DVector<f64>) -> Result<CoefficientVector> {
    if obs_coeffs.len() != povm.span_dim() {
        return Err(Error::LenMismatch {
            expected: povm.span_dim(),
            got: obs_coeffs.len(),
        });
    }
    let ones = DVector::from_element(povm.len(), 1.0);
    let gram = povm.weighted_gram(&ones);
    let w = guarded_spd_solve(&gram, obs_coeffs)?;
    let x = povm.r_mul(&w);
    let residual = (povm.rt_mul(&x) - obs_coeffs).norm();
    Ok(CoefficientVector::from_parts(
        x,
        povm.basis_hash(),
        residual,
    ))
}

/// Raw closed-form solve of the weighted minimization: returns the optimal
/// coefficients together with the objective `sum_j p_j x_j^2 = o^T Q^-1 o`.
/// Hot path shared by the public wrapper and the outer ascent.
pub(crate) fn optimal_coeffs_raw(
    povm: &Povm,
    obs_coeffs: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let low: Vec<usize> = (0..p.len()).filter(|&j| p[j] <= P_FLOOR).collect();
    if !low.is_empty() {
        return Err(Error::ZeroProbability { indices: low });
    }
    let inv_p = p.map(|v| 1.0 / v);
    let q = povm.weighted_gram(&inv_p);
    let w = guarded_spd_solve(&q, obs_coeffs)?;
    let objective = obs_coeffs.dot(&w);
    let mut x = povm.r_mul(&w);
    x.component_mul_assign(&inv_p);
    Ok((x, objective))
}

/// Only the optimal objective value `o^T (R^T P^-1 R)^-1 o`; skips forming
/// the coefficient vector (used by line searches).
pub(crate) fn optimal_objective_raw(
    povm: &Povm,
    obs_coeffs: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<f64> {
    let low: Vec<usize> = (0..p.len()).filter(|&j| p[j] <= P_FLOOR).collect();
    if !low.is_empty() {
        return Err(Error::ZeroProbability { indices: low });
    }
    let inv_p = p.map(|v| 1.0 / v);
    let q = povm.weighted_gram(&inv_p);
    let w = guarded_spd_solve(&q, obs_coeffs)?;
    Ok(obs_coeffs.dot(&w))
}

/// State-optimal coefficients `x* = P^-1 R (R^T P^-1 R)^-1 o`: the unique
/// feasible minimizer of `sum_j p_j x_j^2` when all probabilities are
/// strictly positive. With tied (uniform) weights this reduces to the
/// canonical coefficients.
pub fn optimal_coefficients_for_state(
    povm: &Povm,
    obs_coeffs: &DVector<f64>,
    p: &ProbabilityVector,
) -> Result<CoefficientVector> {
    if obs_coeffs.len() != povm.span_dim() {
        return Err(Error::LenMismatch {
            expected: povm.span_dim(),
            got: obs_coeffs.len(),
        });
    }
    if p.len() != povm.len() {
        return Err(Error::LenMismatch {
            expected: povm.len(),
            got: p.len(),
        });
    }
    let (x, _) = optimal_coeffs_raw(povm, obs_coeffs, p.values())?;
    let residual = (povm.rt_mul(&x) - obs_coeffs).norm();
    Ok(CoefficientVector::from_parts(
        x,
        povm.basis_hash(),
        residual,
    ))
}

/// Independent oracle for the inner minimization: solves the stationarity
/// system of the Lagrangian
///
/// ```text
///   [ 2 diag(p)   -R ] [ x  ]   [ 0 ]
///   [ R^T          0 ] [ mu ] = [ o ]
/// ```
///
/// by a dense factorization with full pivoting, independent of the closed
/// form. Zero probabilities are admissible whenever the saddle system stays
/// nonsingular.
pub fn qp_inner_oracle(
    povm: &Povm,
    obs_coeffs: &DVector<f64>,
    p: &ProbabilityVector,
) -> Result<CoefficientVector> {
    let n = povm.len();
    let d_span = povm.span_dim();
    if obs_coeffs.len() != d_span {
        return Err(Error::LenMismatch {
            expected: d_span,
            got: obs_coeffs.len(),
        });
    }
    if p.len() != n {
        return Err(Error::LenMismatch {
            expected: n,
            got: p.len(),
        });
    }
    let r = povm.coeff_matrix_materialized();
    let size = n + d_span;
    let mut kkt = DMatrix::zeros(size, size);
    for j in 0..n {
        kkt[(j, j)] = 2.0 * p.values()[j];
    }
    for j in 0..n {
        for k in 0..d_span {
            kkt[(j, n + k)] = -r[(j, k)];
            kkt[(n + k, j)] = r[(j, k)];
        }
    }
    let mut rhs = DVector::zeros(size);
    for k in 0..d_span {
        rhs[n + k] = obs_coeffs[k];
    }
    let lu = kkt.clone().full_piv_lu();
    let sol = lu.solve(&rhs).ok_or(Error::SingularKkt)?;
    // A solvable-but-garbage solve (severe ill-conditioning) shows up in the
    // residual; treat it as singular.
    let sys_residual = (&kkt * &sol - &rhs).amax();
    let scale = rhs.amax().max(1.0);
    if !sys_residual.is_finite() || sys_residual > 1e-6 * scale {
        return Err(Error::SingularKkt);
    }
    let x = DVector::from_iterator(n, sol.iter().take(n).copied());
    let residual = (povm.rt_mul(&x) - obs_coeffs).norm();
    if residual > FEASIBILITY_TOL {
        return Err(Error::SingularKkt);
    }
    Ok(CoefficientVector::from_parts(
        x,
        povm.basis_hash(),
        residual,
    ))
}

/// Estimator variance `sum_j p_j x_j^2 - (sum_j p_j x_j)^2` under the given
/// outcome distribution, in compensated summation.
pub fn variance(x: &CoefficientVector, p: &ProbabilityVector) -> Result<f64> {
    if x.len() != p.len() {
        return Err(Error::LenMismatch {
            expected: p.len(),
            got: x.len(),
        });
    }
    Ok(variance_raw(x.values(), p.values()))
}

pub(crate) fn variance_raw(x: &DVector<f64>, p: &DVector<f64>) -> f64 {
    let second = compensated_sum(x.iter().zip(p.iter()).map(|(&xj, &pj)| pj * xj * xj));
    let mean = compensated_sum(x.iter().zip(p.iter()).map(|(&xj, &pj)| pj * xj));
    second - mean * mean
}

/// Shadow-norm style bound `lambda_max(sum_j x_j^2 E_j)`: it equals
/// `max_rho sum_j p_j(rho) x_j^2` and upper-bounds the worst-case variance
/// of the same coefficients.
pub fn shadow_norm_bound(x: &CoefficientVector, povm: &Povm) -> Result<f64> {
    x.check_against(povm)?;
    let weights = x.values().map(|v| v * v);
    Ok(povm.weighted_effect_sum(&weights).max_eigenvalue())
}

/// Depolarizing shift `E_j -> (1-eps) E_j + (eps/n) I`. The output still
/// resolves the identity, the span is unchanged (the identity is already in
/// it), and every outcome probability is at least `eps/n` for every state.
pub fn regularize_povm(povm: &Povm, eps: f64) -> Result<Povm> {
    povm.regularized(eps)
}

/// Builds the dual frame `eta_j = sum_k L_jk B_k` from an n x D matrix `L`
/// with `R^T L = I_D` (any such pseudo-inverse of R yields a valid frame).
pub fn dual_frame(
    povm: &Povm,
    l_matrix: &DMatrix<f64>,
    basis: &OperatorBasis,
    source: DualFrameSource,
) -> Result<DualFrame> {
    let n = povm.len();
    let d_span = povm.span_dim();
    if l_matrix.nrows() != n || l_matrix.ncols() != d_span {
        return Err(Error::LenMismatch {
            expected: n * d_span,
            got: l_matrix.nrows() * l_matrix.ncols(),
        });
    }
    let r = povm.coeff_matrix_materialized();
    let product = r.tr_mul(l_matrix);
    let deviation = (&product - DMatrix::<f64>::identity(d_span, d_span)).amax();
    if deviation > PSEUDO_INVERSE_TOL {
        return Err(Error::NotPseudoInverse { deviation });
    }
    let mut elements = Vec::with_capacity(n);
    for j in 0..n {
        let coeffs = l_matrix.row(j).transpose();
        elements.push(basis.reconstruct(&coeffs)?);
    }
    Ok(DualFrame { elements, source })
}

/// The canonical dual frame, from the Moore-Penrose pseudo-inverse
/// `L_MP = R (R^T R)^-1`.
pub fn canonical_dual_frame(povm: &Povm) -> Result<DualFrame> {
    let r = povm.coeff_matrix_materialized();
    let gram = r.tr_mul(&r);
    let chol = gram.cholesky().ok_or(Error::RankDeficient {
        cond: f64::INFINITY,
    })?;
    let mut l = DMatrix::zeros(povm.len(), povm.span_dim());
    for k in 0..povm.span_dim() {
        let mut e = DVector::zeros(povm.span_dim());
        e[k] = 1.0;
        let col = &r * chol.solve(&e);
        l.column_mut(k).copy_from(&col);
    }
    dual_frame(povm, &l, povm.basis(), DualFrameSource::Canonical)
}

/// The state-dependent optimal dual frame, from `L* = P^-1 R Q^-1`.
pub fn optimal_dual_frame(povm: &Povm, p: &ProbabilityVector) -> Result<DualFrame> {
    let n = povm.len();
    let low: Vec<usize> = (0..n).filter(|&j| p.values()[j] <= P_FLOOR).collect();
    if !low.is_empty() {
        return Err(Error::ZeroProbability { indices: low });
    }
    let inv_p = p.values().map(|v| 1.0 / v);
    let q = povm.weighted_gram(&inv_p);
    let chol = q.cholesky().ok_or(Error::RankDeficient {
        cond: f64::INFINITY,
    })?;
    let r = povm.coeff_matrix_materialized();
    let mut l = DMatrix::zeros(n, povm.span_dim());
    for k in 0..povm.span_dim() {
        let mut e = DVector::zeros(povm.span_dim());
        e[k] = 1.0;
        let mut col = &r * chol.solve(&e);
        col.component_mul_assign(&inv_p);
        l.column_mut(k).copy_from(&col);
    }
    dual_frame(
        povm,
        &l,
        povm.basis(),
        DualFrameSource::StateDependent(p.source_state().clone()),
    )
}

/// Statistics from a randomized inequality probe.
#[derive(Debug, Clone, Copy)]
pub struct ProbeStats {
    pub trials: usize,
    pub violations: usize,
    pub max_violation: f64,
}

/// Randomized check of convexity of the variance in the coefficients at
/// fixed states: for feasible x, y and `lam` in (0, 1),
/// `f(lam x + (1-lam) y, rho) <= lam f(x, rho) + (1-lam) f(y, rho)` up to
/// `slack`. Returns violation statistics (zero expected).
pub fn convexity_probe(
    povm: &Povm,
    obs_coeffs: &DVector<f64>,
    trials: usize,
    slack: f64,
    seed: u64,
) -> Result<ProbeStats> {
    use rand::Rng;
    let base = canonical_coefficients(povm, obs_coeffs)?;
    let mut violations = 0;
    let mut max_violation = 0.0_f64;
    let mut rng = crate::rng::stream_rng(seed, 0);
    for _ in 0..trials {
        let rho = crate::random::random_density(povm.dim(), &mut rng);
        let p = probabilities(&rho, povm)?;
        let scale_x: f64 = rng.gen_range(-3.0..3.0);
        let scale_y: f64 = rng.gen_range(-3.0..3.0);
        let nu_x = crate::random::random_null_vector(povm, &mut rng);
        let nu_y = crate::random::random_null_vector(povm, &mut rng);
        let x = match &nu_x {
            Some(nu) => base.values() + nu * scale_x,
            None => base.values().clone(),
        };
        let y = match &nu_y {
            Some(nu) => base.values() + nu * scale_y,
            None => base.values().clone(),
        };
        let lam: f64 = rng.gen_range(0.0..1.0);
        let mix = &x * lam + &y * (1.0 - lam);
        let lhs = variance_raw(&mix, p.values());
        let rhs = lam * variance_raw(&x, p.values()) + (1.0 - lam) * variance_raw(&y, p.values());
        let gap = lhs - rhs;
        if gap > slack {
            violations += 1;
            max_violation = max_violation.max(gap);
        }
    }
    Ok(ProbeStats {
        trials,
        violations,
        max_violation,
    })
}
