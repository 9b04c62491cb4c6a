//! TEMPORARY scaling benchmark - removed before shipping.

use num_complex::Complex64;
use shadowopt::error::Error;
use shadowopt::minimax::{maximize_over_states, MinimaxOptions, MinimaxReport};
use shadowopt::operator::HermitianOperator;
use shadowopt::povm::{build_xz_povm, tensor_povm_power};

fn report_of(result: Result<MinimaxReport, Error>) -> MinimaxReport {
    match result {
        Ok(r) => r,
        Err(Error::NotConverged {
            report: Some(r), ..
        }) => *r,
        Err(e) => panic!("solver failed: {e}"),
    }
}

#[test]
#[ignore]
fn scaling_bench() {
    let theta: f64 = 0.0;
    let ket = [
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::new((theta / 2.0).sin(), 0.0),
    ];
    let single_obs = HermitianOperator::projector(&ket);
    let single = build_xz_povm();
    for n in 1..=5usize {
        let t0 = std::time::Instant::now();
        let povm = tensor_povm_power(&single, n, 10_000_000).unwrap();
        let mut obs = single_obs.clone();
        for _ in 1..n {
            obs = obs.kron(&single_obs);
        }
        let opts = MinimaxOptions {
            restarts: 2,
            seed: 1,
            ..MinimaxOptions::default()
        };
        let report = report_of(maximize_over_states(&povm, &obs, &opts));
        println!(
            "N={n}: optimal={:.6} canonical={:.6} ratio={:.4} gap={:.2e} rank={} iters={:?} conv={} time={:.1}s",
            report.optimal_value,
            report.canonical_worst_case,
            report.optimal_value / report.canonical_worst_case,
            report.duality_gap,
            report.rho_rank,
            report.iterations_per_restart,
            report.converged,
            t0.elapsed().as_secs_f64()
        );
    }
}
