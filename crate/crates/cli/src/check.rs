//! The `check` subcommand: runs the convexity, concavity and oracle
//! property suites and prints one pass/fail line each.

use rand::Rng;
use shadowopt::basis::observable_coeffs;
use shadowopt::frame::{
    canonical_coefficients, convexity_probe, optimal_coefficients_for_state, probabilities,
    qp_inner_oracle, regularize_povm,
};
use shadowopt::minimax::concavity_probe;
use shadowopt::operator::HermitianOperator;
use shadowopt::povm::build_xz_povm;
use shadowopt::random::{random_full_rank_density, random_hermitian_in_span, random_povm};
use shadowopt::rng::stream_rng;

use crate::error::CliError;
use crate::experiments::pauli_sum_observable;

fn status_line(name: &str, ok: bool, detail: &str) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

/// Runs all suites; returns true when every one passes.
pub fn run_check(seed: u64) -> Result<bool, CliError> {
    let mut all_ok = true;

    // Convexity of the variance in the coefficients (1000 random triples).
    let povm = build_xz_povm();
    let obs = HermitianOperator::pauli_z();
    let o = observable_coeffs(&obs, povm.basis())?;
    let stats = convexity_probe(&povm, &o, 1000, 1e-10, seed)?;
    all_ok &= status_line(
        "convexity in coefficients",
        stats.violations == 0,
        &format!(
            "{} violations in {} trials (max {:.2e})",
            stats.violations, stats.trials, stats.max_violation
        ),
    );

    // Concavity of the variance in the state, single-qubit and two-qubit
    // Pauli-sum instances (1000 random mixtures each).
    let x = canonical_coefficients(&povm, &o)?;
    let stats = concavity_probe(&x, &povm, &obs, 1000, 1e-10, seed ^ 0x51)?;
    all_ok &= status_line(
        "concavity in the state (single qubit)",
        stats.violations == 0,
        &format!(
            "{} violations in {} trials (max {:.2e})",
            stats.violations, stats.trials, stats.max_violation
        ),
    );
    let (povm2, obs2) = pauli_sum_observable(0.7, 2)?;
    let o2 = observable_coeffs(&obs2, povm2.basis())?;
    let x2 = canonical_coefficients(&povm2, &o2)?;
    let stats = concavity_probe(&x2, &povm2, &obs2, 1000, 1e-10, seed ^ 0x52)?;
    all_ok &= status_line(
        "concavity in the state (two-qubit Pauli sum)",
        stats.violations == 0,
        &format!(
            "{} violations in {} trials (max {:.2e})",
            stats.violations, stats.trials, stats.max_violation
        ),
    );

    // Closed form against the KKT oracle on random instances.
    let mut rng = stream_rng(seed ^ 0x53, 0);
    let mut worst_rel = 0.0_f64;
    let mut oracle_ok = true;
    for _ in 0..100 {
        let d = rng.gen_range(2..=4usize);
        let n = rng.gen_range(d * d..=16usize);
        let instance = random_povm(d, n, &mut rng);
        let reg = regularize_povm(&instance, 1e-3)?;
        let target = random_hermitian_in_span(reg.basis(), &mut rng);
        let oc = observable_coeffs(&target, reg.basis())?;
        let rho = random_full_rank_density(d, 0.05, &mut rng);
        let p = probabilities(&rho, &reg)?;
        let closed = optimal_coefficients_for_state(&reg, &oc, &p)?;
        let oracle = qp_inner_oracle(&reg, &oc, &p)?;
        let objective = |values: &nalgebra::DVector<f64>| -> f64 {
            values
                .iter()
                .zip(p.values().iter())
                .map(|(&xj, &pj)| pj * xj * xj)
                .sum()
        };
        let a = objective(closed.values());
        let b = objective(oracle.values());
        let rel = (a - b).abs() / a.abs().max(1e-30);
        worst_rel = worst_rel.max(rel);
        if rel > 1e-8 {
            oracle_ok = false;
        }
    }
    all_ok &= status_line(
        "inner-minimization oracle equivalence",
        oracle_ok,
        &format!("100 random instances, worst relative gap {worst_rel:.2e}"),
    );

    Ok(all_ok)
}
