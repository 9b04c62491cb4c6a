//! Randomized property suites for the reconstruction layer: unbiasedness,
//! oracle equivalence, optimality of the closed form, convexity, and the
//! structural identities of coefficient matrices and dual frames.

use nalgebra::DVector;
use rand::Rng;
use shadowopt::basis::observable_coeffs;
use shadowopt::frame::{
    canonical_coefficients, canonical_dual_frame, convexity_probe,
    optimal_coefficients_for_state, probabilities, qp_inner_oracle, regularize_povm, variance,
    CoefficientVector,
};
use shadowopt::operator::{hs_inner, HermitianOperator};
use shadowopt::povm::{build_xz_povm, tensor_povm, Povm};
use shadowopt::random::{
    random_density, random_full_rank_density, random_hermitian, random_hermitian_in_span,
    random_null_vector, random_povm,
};
use shadowopt::rng::stream_rng;
use shadowopt::state::DensityMatrix;

/// Random (POVM, observable coefficients) pair at small scale.
fn random_instance(rng: &mut impl Rng) -> (Povm, DVector<f64>) {
    let d = rng.gen_range(2..=4usize);
    let n = rng.gen_range(d * d..=16usize);
    let povm = random_povm(d, n, rng);
    let obs = random_hermitian_in_span(povm.basis(), rng);
    let o = observable_coeffs(&obs, povm.basis()).expect("observable built in span");
    (povm, o)
}

#[test]
fn unbiasedness_of_feasible_coefficients() {
    let mut rng = stream_rng(101, 0);
    for _ in 0..5 {
        let (povm, o) = random_instance(&mut rng);
        let obs = povm.basis().reconstruct(&o).unwrap();
        let base = canonical_coefficients(&povm, &o).unwrap();
        for _ in 0..10 {
            // Any feasible x, not just the canonical one.
            let x = match random_null_vector(&povm, &mut rng) {
                Some(nu) => {
                    let t: f64 = rng.gen_range(-2.0..2.0);
                    CoefficientVector::new(base.values() + nu * t, &povm, &o).unwrap()
                }
                None => base.clone(),
            };
            let rho = random_density(povm.dim(), &mut rng);
            let p = probabilities(&rho, &povm).unwrap();
            let mean: f64 = p
                .values()
                .iter()
                .zip(x.values().iter())
                .map(|(&pj, &xj)| pj * xj)
                .sum();
            let truth = rho.expectation(&obs).unwrap();
            assert!(
                (mean - truth).abs() < 1e-9,
                "estimator mean {mean} vs Tr(O rho) {truth}"
            );
        }
    }
}

#[test]
fn oracle_equivalence_on_random_instances() {
    let mut rng = stream_rng(102, 0);
    for trial in 0..100 {
        let (povm, o) = random_instance(&mut rng);
        let reg = regularize_povm(&povm, 1e-3).unwrap();
        let rho = random_full_rank_density(reg.dim(), 0.05, &mut rng);
        let p = probabilities(&rho, &reg).unwrap();
        let closed = optimal_coefficients_for_state(&reg, &o, &p).unwrap();
        let oracle = qp_inner_oracle(&reg, &o, &p).unwrap();
        let obj = |x: &CoefficientVector| -> f64 {
            x.values()
                .iter()
                .zip(p.values().iter())
                .map(|(&xj, &pj)| pj * xj * xj)
                .sum()
        };
        let a = obj(&closed);
        let b = obj(&oracle);
        let rel = (a - b).abs() / a.abs().max(1e-30);
        assert!(rel < 1e-8, "trial {trial}: objectives {a} vs {b}, rel {rel}");
    }
}

#[test]
fn closed_form_beats_feasible_perturbations() {
    let mut rng = stream_rng(103, 0);
    for _ in 0..10 {
        let (povm, o) = random_instance(&mut rng);
        let reg = regularize_povm(&povm, 1e-3).unwrap();
        let rho = random_full_rank_density(reg.dim(), 0.05, &mut rng);
        let p = probabilities(&rho, &reg).unwrap();
        let x_star = optimal_coefficients_for_state(&reg, &o, &p).unwrap();
        let obj = |values: &DVector<f64>| -> f64 {
            values
                .iter()
                .zip(p.values().iter())
                .map(|(&xj, &pj)| pj * xj * xj)
                .sum()
        };
        let best = obj(x_star.values());
        for _ in 0..20 {
            if let Some(nu) = random_null_vector(&reg, &mut rng) {
                let t: f64 = rng.gen_range(-1.0..1.0);
                let perturbed = x_star.values() + nu * t;
                assert!(
                    obj(&perturbed) >= best - 1e-12,
                    "perturbation beat the closed form"
                );
            }
        }
    }
}

#[test]
fn convexity_in_coefficients_has_no_violations() {
    let povm = build_xz_povm();
    let o = observable_coeffs(&HermitianOperator::pauli_z(), povm.basis()).unwrap();
    let stats = convexity_probe(&povm, &o, 1000, 1e-10, 104).unwrap();
    assert_eq!(
        stats.violations, 0,
        "convexity violated by {}",
        stats.max_violation
    );
}

#[test]
fn uniform_weight_reduction_on_tensor_povms() {
    // The maximally mixed state induces uniform outcome probabilities on
    // the XZ tensor family, where the state-optimal formula must collapse
    // to the canonical pseudo-inverse solution.
    let single = build_xz_povm();
    let double = tensor_povm(&single, &single).unwrap();
    let mut rng = stream_rng(105, 0);
    for povm in [single, double] {
        let rho = DensityMatrix::maximally_mixed(povm.dim());
        let p = probabilities(&rho, &povm).unwrap();
        for _ in 0..5 {
            let obs = random_hermitian_in_span(povm.basis(), &mut rng);
            let o = observable_coeffs(&obs, povm.basis()).unwrap();
            let x_star = optimal_coefficients_for_state(&povm, &o, &p).unwrap();
            let x_mp = canonical_coefficients(&povm, &o).unwrap();
            let dev = (x_star.values() - x_mp.values()).amax();
            assert!(dev < 1e-10, "reduction failed by {dev}");
        }
    }
}

#[test]
fn variance_is_invariant_under_outcome_relabeling() {
    let povm = build_xz_povm();
    let o = observable_coeffs(&HermitianOperator::pauli_z(), povm.basis()).unwrap();
    let x = canonical_coefficients(&povm, &o).unwrap();
    let perm = [2usize, 0, 3, 1];
    let permuted_effects: Vec<HermitianOperator> =
        perm.iter().map(|&j| povm.effect(j)).collect();
    let permuted_povm = Povm::new(permuted_effects, shadowopt::basis::pauli_basis_xz()).unwrap();
    let permuted_x = CoefficientVector::new(
        DVector::from_iterator(4, perm.iter().map(|&j| x.values()[j])),
        &permuted_povm,
        &o,
    )
    .unwrap();
    let mut rng = stream_rng(106, 0);
    for _ in 0..20 {
        let rho = random_density(2, &mut rng);
        let p = probabilities(&rho, &povm).unwrap();
        let pp = probabilities(&rho, &permuted_povm).unwrap();
        let v1 = variance(&x, &p).unwrap();
        let v2 = variance(&permuted_x, &pp).unwrap();
        assert!((v1 - v2).abs() < 1e-12);
    }
}

#[test]
fn coefficient_rows_reconstruct_effects_on_random_povms() {
    let mut rng = stream_rng(107, 0);
    for trial in 0..100 {
        let d = rng.gen_range(2..=4usize);
        let n = rng.gen_range(d * d..=16usize);
        let povm = random_povm(d, n, &mut rng);
        let r = povm.coeff_matrix_materialized();
        for j in 0..n {
            let coeffs = DVector::from_iterator(povm.span_dim(), r.row(j).iter().copied());
            let rec = povm.basis().reconstruct(&coeffs).unwrap();
            let dev = povm.effect(j).sub(&rec).unwrap().max_abs_entry();
            assert!(dev <= 1e-10, "trial {trial}, row {j}: residual {dev}");
        }
    }
}

#[test]
fn hs_inner_is_a_real_inner_product() {
    let mut rng = stream_rng(108, 0);
    for _ in 0..50 {
        let d = rng.gen_range(2..=5usize);
        let a = random_hermitian(d, 1.0, &mut rng);
        let b = random_hermitian(d, 1.0, &mut rng);
        let c = random_hermitian(d, 1.0, &mut rng);
        let alpha: f64 = rng.gen_range(-2.0..2.0);
        // Symmetry.
        let ab = hs_inner(&a, &b).unwrap();
        let ba = hs_inner(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-10 * (1.0 + ab.abs()));
        // Linearity in the second slot.
        let lin = hs_inner(&a, &b.scale(alpha).add(&c).unwrap()).unwrap();
        let expect = alpha * ab + hs_inner(&a, &c).unwrap();
        assert!((lin - expect).abs() < 1e-9 * (1.0 + expect.abs()));
        // Positivity.
        assert!(hs_inner(&a, &a).unwrap() > 0.0);
    }
}

#[test]
fn basis_expansion_reconstructs_operators_in_span() {
    let mut rng = stream_rng(109, 0);
    for _ in 0..20 {
        let (povm, _) = random_instance(&mut rng);
        let a = random_hermitian_in_span(povm.basis(), &mut rng);
        let coeffs = observable_coeffs(&a, povm.basis()).unwrap();
        let rec = povm.basis().reconstruct(&coeffs).unwrap();
        assert!(a.sub(&rec).unwrap().max_abs_entry() < 1e-12);
    }
}

#[test]
fn dual_frame_resolution_identity_on_random_povms() {
    let mut rng = stream_rng(110, 0);
    for _ in 0..5 {
        let (povm, _) = random_instance(&mut rng);
        let frame = canonical_dual_frame(&povm).unwrap();
        for _ in 0..20 {
            let a = random_hermitian_in_span(povm.basis(), &mut rng);
            let mut rec = HermitianOperator::zero(povm.dim());
            for (j, eta) in frame.elements().iter().enumerate() {
                let w = hs_inner(&povm.effect(j), &a).unwrap();
                rec = rec.add(&eta.scale(w)).unwrap();
            }
            let dev = a.sub(&rec).unwrap().max_abs_entry();
            assert!(dev < 1e-8, "resolution identity violated by {dev}");
        }
    }
}
