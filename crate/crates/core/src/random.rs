//! Seeded random states, observables and POVMs.
//!
//! These generators back the property suites and the optimizer's random
//! restarts. They take an explicit RNG so every caller controls its stream;
//! nothing here touches global randomness.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::basis::OperatorBasis;
use crate::operator::HermitianOperator;
use crate::povm::Povm;
use crate::state::DensityMatrix;

fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix with the
/// phase convention fixed by the R diagonal.
pub fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        q.column_mut(k).scale_mut(1.0);
        for i in 0..dim {
            q[(i, k)] *= phase.conj();
        }
    }
    q
}

/// Random mixed state: Haar eigenvectors, eigenvalues uniform on the
/// simplex (normalized exponentials).
pub fn random_density<R: Rng>(dim: usize, rng: &mut R) -> DensityMatrix {
    let u = random_unitary(dim, rng);
    let mut w: Vec<f64> = (0..dim)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    DensityMatrix::from_eigensystem(&u, &w)
}

/// Random mixed state with every eigenvalue at least `floor`.
pub fn random_full_rank_density<R: Rng>(dim: usize, floor: f64, rng: &mut R) -> DensityMatrix {
    let u = random_unitary(dim, rng);
    let mut w: Vec<f64> = (0..dim)
        .map(|_| floor + -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    DensityMatrix::from_eigensystem(&u, &w)
}

/// Haar-random pure state.
pub fn random_pure<R: Rng>(dim: usize, rng: &mut R) -> DensityMatrix {
    let mut ket: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
    let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut ket {
        *z /= norm;
    }
    DensityMatrix::pure(&ket)
}

/// GUE-like random Hermitian with entries of the given scale.
pub fn random_hermitian<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> HermitianOperator {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let x: f64 = rng.sample(StandardNormal);
        m[(i, i)] = Complex64::new(scale * x, 0.0);
        for j in (i + 1)..dim {
            let z = complex_gaussian(rng) * (scale * std::f64::consts::FRAC_1_SQRT_2);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermitianOperator::from_matrix_unchecked(m)
}

/// Random traceless Hermitian direction of unit Frobenius norm.
pub fn random_traceless_direction<R: Rng>(dim: usize, rng: &mut R) -> HermitianOperator {
    let h = random_hermitian(dim, 1.0, rng);
    let shift = HermitianOperator::identity(dim).scale(-h.trace() / dim as f64);
    let t = h.add(&shift).expect("same dim");
    let norm = t.frobenius_norm();
    t.scale(1.0 / norm)
}

/// Random element of the basis span with standard-normal coefficients.
pub fn random_hermitian_in_span<R: Rng>(
    basis: &OperatorBasis,
    rng: &mut R,
) -> HermitianOperator {
    let coeffs = DVector::from_fn(basis.len(), |_, _| rng.sample(StandardNormal));
    basis.reconstruct(&coeffs).expect("length matches basis")
}

/// Random n-effect POVM on a d-dimensional system: Wishart effects
/// conjugated by the inverse square root of their sum, so they resolve the
/// identity exactly. The span basis is derived from the effects.
pub fn random_povm<R: Rng>(dim: usize, n_effects: usize, rng: &mut R) -> Povm {
    assert!(n_effects >= dim * dim || n_effects >= 2, "too few effects");
    loop {
        let wisharts: Vec<DMatrix<Complex64>> = (0..n_effects)
            .map(|_| {
                let g = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
                &g * g.adjoint()
            })
            .collect();
        let mut total = DMatrix::<Complex64>::zeros(dim, dim);
        for w in &wisharts {
            total += w;
        }
        let eig = total.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < 1e-8) {
            continue; // freak near-singular draw; redraw
        }
        let mut scaled = eig.eigenvectors.clone();
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(1.0 / l.sqrt());
        }
        let inv_sqrt = &scaled * eig.eigenvectors.adjoint();
        let effects: Vec<HermitianOperator> = wisharts
            .iter()
            .map(|w| {
                let m = &inv_sqrt * w * &inv_sqrt;
                // Symmetrize away the rounding from the triple product.
                let mut sym = m.clone();
                for i in 0..dim {
                    sym[(i, i)] = Complex64::new(sym[(i, i)].re, 0.0);
                    for j in (i + 1)..dim {
                        let avg = (sym[(i, j)] + sym[(j, i)].conj()) * 0.5;
                        sym[(i, j)] = avg;
                        sym[(j, i)] = avg.conj();
                    }
                }
                HermitianOperator::from_matrix_unchecked(sym)
            })
            .collect();
        match Povm::with_auto_basis(effects) {
            Ok(p) => return p,
            Err(_) => continue,
        }
    }
}

/// Random vector in the null space of `R^T` (the homogeneous post-processing
/// freedom), normalized; `None` when the POVM has no redundancy (n = D).
pub fn random_null_vector<R: Rng>(povm: &Povm, rng: &mut R) -> Option<DVector<f64>> {
    let n = povm.len();
    if n == povm.span_dim() {
        return None;
    }
    let r = povm.coeff_matrix_materialized();
    let gram = r.tr_mul(&r);
    let chol = gram.cholesky()?;
    for _ in 0..16 {
        let g = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
        // g - R (R^T R)^{-1} R^T g.
        let proj = &r * chol.solve(&r.tr_mul(&g));
        let nu = g - proj;
        let norm = nu.norm();
        if norm > 1e-8 {
            return Some(nu / norm);
        }
    }
    None
}
