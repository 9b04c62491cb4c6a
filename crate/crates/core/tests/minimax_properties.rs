//! Property suites for the outer solver: monotone ascent, projection
//! correctness, the min-max / max-min equality on single-qubit instances
//! (against an independent brute-force oracle), the benchmark chain, and
//! scheduling-independent determinism.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use shadowopt::basis::observable_coeffs;
use shadowopt::error::Error;
use shadowopt::frame::{canonical_coefficients, regularize_povm, shadow_norm_bound};
use shadowopt::minimax::{maximize_over_states, MinimaxOptions, MinimaxReport};
use shadowopt::operator::{hs_inner, HermitianOperator};
use shadowopt::povm::{build_xz_povm, tensor_povm, Povm};
use shadowopt::random::{random_hermitian, random_null_vector, random_povm};
use shadowopt::rng::stream_rng;
use shadowopt::state::{project_to_density, DensityMatrix};

fn report_of(result: Result<MinimaxReport, Error>) -> MinimaxReport {
    match result {
        Ok(r) => r,
        Err(Error::NotConverged {
            report: Some(r), ..
        }) => *r,
        Err(e) => panic!("solver failed: {e}"),
    }
}

fn opts(seed: u64) -> MinimaxOptions {
    MinimaxOptions {
        restarts: 4,
        seed,
        ..MinimaxOptions::default()
    }
}

/// Single-qubit projector onto cos(theta/2)|0> + sin(theta/2)|1>.
fn plane_projector(theta: f64) -> HermitianOperator {
    let ket = [
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::new((theta / 2.0).sin(), 0.0),
    ];
    HermitianOperator::projector(&ket)
}

/// Components (c_I, [c_X, c_Z]) of a single-qubit operator in span{I, X, Z}.
fn pauli_components(op: &HermitianOperator) -> (f64, [f64; 2]) {
    let x = HermitianOperator::pauli_x();
    let z = HermitianOperator::pauli_z();
    (
        op.trace() / 2.0,
        [
            hs_inner(&x, op).unwrap() / 2.0,
            hs_inner(&z, op).unwrap() / 2.0,
        ],
    )
}

/// Exact maximum of `s0 + s.u - (alpha + w.u)^2` over the unit disk: the
/// worst-case variance over states for operators confined to span{I, X, Z}
/// (the Y Bloch coordinate never enters). Reduction to one dimension along
/// w plus ternary search on a concave profile.
fn disk_max(s0: f64, s: [f64; 2], alpha: f64, w: [f64; 2]) -> f64 {
    let wn = (w[0] * w[0] + w[1] * w[1]).sqrt();
    let base = s0 - alpha * alpha;
    if wn < 1e-14 {
        return base + (s[0] * s[0] + s[1] * s[1]).sqrt();
    }
    let wh = [w[0] / wn, w[1] / wn];
    let wp = [-wh[1], wh[0]];
    let b = [s[0] - 2.0 * alpha * w[0], s[1] - 2.0 * alpha * w[1]];
    let b_par = b[0] * wh[0] + b[1] * wh[1];
    let b_perp = (b[0] * wp[0] + b[1] * wp[1]).abs();
    let h = |xi: f64| {
        base + b_par * xi - wn * wn * xi * xi + b_perp * (1.0 - xi * xi).max(0.0).sqrt()
    };
    let mut lo = -1.0_f64;
    let mut hi = 1.0_f64;
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if h(m1) < h(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    h(0.5 * (lo + hi))
}

/// Brute-force min-max over the single post-processing degree of freedom
/// (n - D = 1 for the XZ POVM): grid over x(t) = x_MP + t nu with exact
/// worst-case states from [`disk_max`], followed by two refinement rounds.
fn brute_force_minmax(reg: &Povm, obs: &HermitianOperator, grid: usize) -> f64 {
    let o = observable_coeffs(obs, reg.basis()).unwrap();
    let x_mp = canonical_coefficients(reg, &o).unwrap();
    let mut rng = stream_rng(777, 0);
    let nu = random_null_vector(reg, &mut rng).expect("XZ POVM has one free direction");
    let (alpha, w) = pauli_components(obs);
    let phi = |t: f64| -> f64 {
        let xt = x_mp.values() + &nu * t;
        let s_x = reg.weighted_effect_sum(&xt.map(|v| v * v));
        let (s0, s) = pauli_components(&s_x);
        disk_max(s0, s, alpha, w)
    };
    let mut lo = -8.0_f64;
    let mut hi = 8.0_f64;
    let mut best = f64::INFINITY;
    let mut best_t = 0.0;
    for _round in 0..3 {
        let step = (hi - lo) / grid as f64;
        for i in 0..=grid {
            let t = lo + step * i as f64;
            let v = phi(t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        lo = best_t - 2.0 * step;
        hi = best_t + 2.0 * step;
    }
    best
}

#[test]
fn ascent_objective_is_monotone_per_restart() {
    let mut rng = stream_rng(201, 0);
    for trial in 0..5 {
        let d = rng.gen_range(2..=3usize);
        let povm = random_povm(d, d * d + 2, &mut rng);
        let obs = random_hermitian(d, 1.0, &mut rng);
        let report = report_of(maximize_over_states(&povm, &obs, &opts(trial)));
        for pair in report.objective_trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-12,
                "objective decreased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }
}

#[test]
fn spectrahedron_projection_matches_bisection_oracle() {
    let mut rng = stream_rng(202, 0);
    for _ in 0..100 {
        let m = random_hermitian(4, 2.0, &mut rng);
        let projected = project_to_density(&m);

        // Independent route: bisect the water level tau with
        // sum_i max(lambda_i - tau, 0) = 1, then rebuild.
        let eig = m.entries().clone().symmetric_eigen();
        let lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let total_above = |tau: f64| -> f64 {
            lambdas.iter().map(|&l| (l - tau).max(0.0)).sum::<f64>()
        };
        let mut lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
        let mut hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total_above(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        let weights: Vec<f64> = lambdas.iter().map(|&l| (l - tau).max(0.0)).collect();
        let oracle = DensityMatrix::from_eigensystem(&eig.eigenvectors, &weights);

        let dev = projected.op().sub(oracle.op()).unwrap().max_abs_entry();
        assert!(dev < 1e-10, "projection deviates from oracle by {dev}");
    }
}

#[test]
fn projection_is_frobenius_nearest_among_sampled_states() {
    let mut rng = stream_rng(203, 0);
    for _ in 0..20 {
        let m = random_hermitian(4, 1.5, &mut rng);
        let projected = project_to_density(&m);
        let dist = m.sub(projected.op()).unwrap().frobenius_norm();
        for _ in 0..20 {
            let sigma = shadowopt::random::random_density(4, &mut rng);
            let other = m.sub(sigma.op()).unwrap().frobenius_norm();
            assert!(dist <= other + 1e-12);
        }
    }
}

#[test]
fn min_max_equals_max_min_on_single_qubit_instances() {
    for (i, &theta) in [0.0, 0.35, std::f64::consts::FRAC_PI_4, 1.2, std::f64::consts::FRAC_PI_2]
        .iter()
        .enumerate()
    {
        let povm = build_xz_povm();
        let obs = plane_projector(theta);
        let options = opts(300 + i as u64);
        let report = report_of(maximize_over_states(&povm, &obs, &options));
        let reg = regularize_povm(&povm, options.eps_regularization).unwrap();
        let brute = brute_force_minmax(&reg, &obs, 2000);
        assert!(
            (report.optimal_value - brute).abs() <= 1e-5,
            "theta {theta}: max-min {} vs brute min-max {brute}",
            report.optimal_value
        );
    }
}

#[test]
fn benchmark_chain_holds_on_small_problems() {
    let single = build_xz_povm();
    let double = tensor_povm(&single, &single).unwrap();
    let obs_single = plane_projector(0.0);
    let obs_double = obs_single.kron(&obs_single);
    for (i, (povm, obs)) in [(single, obs_single), (double, obs_double)]
        .into_iter()
        .enumerate()
    {
        let options = opts(400 + i as u64);
        let report = report_of(maximize_over_states(&povm, &obs, &options));
        let reg = regularize_povm(&povm, options.eps_regularization).unwrap();
        let o = observable_coeffs(&obs, reg.basis()).unwrap();
        let x_mp = canonical_coefficients(&reg, &o).unwrap();
        let shadow_star = shadow_norm_bound(&report.x_star, &reg).unwrap();
        let shadow_mp = shadow_norm_bound(&x_mp, &reg).unwrap();
        assert!(report.appendix_e_bound <= report.optimal_value + 1e-6);
        assert!(report.optimal_value <= report.canonical_worst_case + 1e-8);
        assert!(report.optimal_value <= shadow_star + 1e-8);
        assert!(report.canonical_worst_case <= shadow_mp + 1e-6);
        assert!(report.duality_gap >= -1e-10);
    }
}

#[test]
fn two_qubit_plane_projector_shows_a_strict_canonical_gap() {
    let single = build_xz_povm();
    let double = tensor_povm(&single, &single).unwrap();
    let obs = plane_projector(0.0);
    let obs2 = obs.kron(&obs);
    let report = report_of(maximize_over_states(&double, &obs2, &opts(55)));
    assert!(
        report.optimal_value < report.canonical_worst_case - 1e-3,
        "expected a strict gap at two qubits: optimal {} vs canonical {}",
        report.optimal_value,
        report.canonical_worst_case
    );
}

#[test]
fn reports_are_identical_across_thread_counts() {
    let povm = build_xz_povm();
    let obs = plane_projector(0.9);
    let options = opts(77);
    let run = |threads: usize| -> MinimaxReport {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| report_of(maximize_over_states(&povm, &obs, &options)))
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.optimal_value.to_bits(), b.optimal_value.to_bits());
    assert_eq!(a.duality_gap.to_bits(), b.duality_gap.to_bits());
    assert_eq!(
        a.canonical_worst_case.to_bits(),
        b.canonical_worst_case.to_bits()
    );
    assert_eq!(a.iterations_per_restart, b.iterations_per_restart);
    let xa: Vec<u64> = a.x_star.values().iter().map(|v| v.to_bits()).collect();
    let xb: Vec<u64> = b.x_star.values().iter().map(|v| v.to_bits()).collect();
    assert_eq!(xa, xb);
}

#[test]
fn reported_rank_matches_rho_star_spectrum() {
    let povm = build_xz_povm();
    let obs = plane_projector(0.4);
    let report = report_of(maximize_over_states(&povm, &obs, &opts(88)));
    let recount = report
        .rho_star
        .op()
        .eigenvalues()
        .iter()
        .filter(|&&l| l > 1e-8)
        .count();
    assert_eq!(report.rho_rank, recount);
    // Sanity on the vector length: one coefficient per effect.
    assert_eq!(report.x_star.len(), 4);
    let _ = DVector::<f64>::zeros(1);
}
