//! Outer maximization over states and saddle-point certification.
//!
//! For a fixed POVM and observable, the inner minimization over feasible
//! coefficients has the closed form of [`crate::frame`]; substituting it
//! leaves the concave envelope `F(rho) = f(x*(rho), rho)` to be maximized
//! over the spectrahedron. Projected gradient ascent with backtracking is
//! monotone and, with the Euclidean projection onto density matrices,
//! converges on this concave problem; multiple seeded restarts guard
//! against line-search stalls on the flat regions the depolarizing
//! regularization can create.
//!
//! The envelope gradient is
//!
//! ```text
//!   G(rho) = sum_j x*_j(rho)^2 E_j - 2 Tr(O rho) O,
//! ```
//!
//! the Danskin derivative through the unique inner minimizer; it is
//! validated against central finite differences by the test suites before
//! any experiment is trusted.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::basis::observable_coeffs;
use crate::error::{Error, Result};
use crate::frame::{
    canonical_coefficients, optimal_coeffs_raw, optimal_objective_raw, variance_raw,
    CoefficientVector, ProbeStats,
};
use crate::operator::{hs_inner, hs_inner_raw, HermitianOperator};
use crate::povm::Povm;
use crate::random::random_density;
use crate::rng::stream_rng;
use crate::state::{project_to_density, DensityMatrix};

/// Iterations the objective may stay flat (relatively, within `value_tol`)
/// before the ascent declares convergence.
const VALUE_WINDOW: usize = 20;

/// Eigenvalue threshold for the reported rank of the worst-case state.
const RANK_EIG_THRESHOLD: f64 = 1e-8;

const ALPHA_MIN: f64 = 1e-18;
const ALPHA_MAX: f64 = 1e6;

/// Line-search rule for the projected ascent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Backtracking { beta: f64, c: f64 },
}

/// Options of the outer solver.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxOptions {
    pub max_iters: usize,
    /// Convergence threshold on the unit-step gradient-mapping norm
    /// `|proj(rho + G) - rho|_F`.
    pub grad_tol: f64,
    /// Relative objective-change threshold over a 20-iteration window.
    pub value_tol: f64,
    pub restarts: usize,
    pub eps_regularization: f64,
    pub seed: u64,
    pub step_rule: StepRule,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tol: 1e-7,
            value_tol: 1e-10,
            restarts: 8,
            eps_regularization: 1e-6,
            seed: 0,
            step_rule: StepRule::Backtracking {
                beta: 0.5,
                c: 1e-4,
            },
        }
    }
}

impl MinimaxOptions {
    pub fn validate(&self) -> Result<()> {
        let StepRule::Backtracking { beta, c } = self.step_rule;
        let bad = |reason: &str| Error::InvalidOptions {
            reason: reason.into(),
        };
        if self.max_iters == 0 {
            return Err(bad("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(bad("grad_tol must be positive"));
        }
        if !(self.value_tol > 0.0) {
            return Err(bad("value_tol must be positive"));
        }
        if self.restarts == 0 {
            return Err(bad("restarts must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.eps_regularization) {
            return Err(bad("eps_regularization must lie in [0, 1)"));
        }
        if !(0.0 < beta && beta < 1.0) {
            return Err(bad("backtracking beta must lie in (0, 1)"));
        }
        if !(0.0 < c && c < 1.0) {
            return Err(bad("Armijo constant must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Full result of a minimax solve.
#[derive(Debug, Clone)]
pub struct MinimaxReport {
    /// The tight variance bound: `max_rho min_x f(x, rho)`.
    pub optimal_value: f64,
    pub x_star: CoefficientVector,
    pub rho_star: DensityMatrix,
    /// Numerical rank of the worst-case state at a 1e-8 eigenvalue cut.
    pub rho_rank: usize,
    /// `max_rho f(x*, rho) - min_x f(x, rho*)`; zero at an exact saddle.
    pub duality_gap: f64,
    /// Worst case of the canonical (Moore-Penrose) coefficients.
    pub canonical_worst_case: f64,
    /// `(lambda_max - lambda_min)^2 / 4` of the observable.
    pub appendix_e_bound: f64,
    pub iterations_per_restart: Vec<usize>,
    /// Accepted objective values of the winning restart, one per iteration;
    /// non-decreasing by the Armijo rule.
    pub objective_trace: Vec<f64>,
    pub wall_time: f64,
    pub converged: bool,
    pub final_grad_norm: f64,
}

struct AscentOutcome {
    rho: DensityMatrix,
    value: f64,
    iterations: usize,
    converged: bool,
    grad_norm: f64,
    history: Vec<f64>,
}

/// Concave objective on the spectrahedron: value produces auxiliary data
/// the gradient can reuse, so accepted line-search points cost one inner
/// solve, not two.
trait Objective: Sync {
    type Aux;
    fn value(&self, rho: &DensityMatrix) -> Result<(f64, Self::Aux)>;
    fn gradient(&self, rho: &DensityMatrix, aux: &Self::Aux) -> Result<HermitianOperator>;
}

/// The envelope `F(rho) = min_x f(x, rho)` via the closed-form inner solve;
/// the optimal coefficients double as the gradient's weights.
struct EnvelopeObjective<'a> {
    povm: &'a Povm,
    o: DVector<f64>,
    obs: &'a HermitianOperator,
}

impl Objective for EnvelopeObjective<'_> {
    type Aux = DVector<f64>;

    fn value(&self, rho: &DensityMatrix) -> Result<(f64, DVector<f64>)> {
        let p = self.povm.probabilities_raw(rho.entries());
        let (x, second_moment) = optimal_coeffs_raw(self.povm, &self.o, &p)?;
        let t = hs_inner_raw(self.obs.entries(), rho.entries());
        Ok((second_moment - t * t, x))
    }

    fn gradient(&self, rho: &DensityMatrix, x: &DVector<f64>) -> Result<HermitianOperator> {
        let weights = x.map(|v| v * v);
        let s = self.povm.weighted_effect_sum(&weights);
        let t = hs_inner_raw(self.obs.entries(), rho.entries());
        s.add(&self.obs.scale(-2.0 * t))
    }
}

/// `f(x, .)` at fixed coefficients: linear term `Tr(rho S_x)` minus the
/// squared expectation.
struct FixedXObjective<'a> {
    s_x: HermitianOperator,
    obs: &'a HermitianOperator,
}

impl Objective for FixedXObjective<'_> {
    type Aux = ();

    fn value(&self, rho: &DensityMatrix) -> Result<(f64, ())> {
        let second = hs_inner_raw(self.s_x.entries(), rho.entries());
        let t = hs_inner_raw(self.obs.entries(), rho.entries());
        Ok((second - t * t, ()))
    }

    fn gradient(&self, rho: &DensityMatrix, _aux: &()) -> Result<HermitianOperator> {
        let t = hs_inner_raw(self.obs.entries(), rho.entries());
        self.s_x.add(&self.obs.scale(-2.0 * t))
    }
}

/// Projected gradient ascent with backtracking from a single start.
fn ascend<O: Objective>(
    start: DensityMatrix,
    objective: &O,
    opts: &MinimaxOptions,
) -> Result<AscentOutcome> {
    let StepRule::Backtracking { beta, c } = opts.step_rule;
    let mut rho = start;
    let (mut value, mut aux) = objective.value(&rho)?;
    let mut history = Vec::with_capacity(opts.max_iters.min(4096) + 1);
    history.push(value);
    let mut g = objective.gradient(&rho, &aux)?;
    let mut prev: Option<(DensityMatrix, HermitianOperator)> = None;
    let mut alpha = 1.0_f64;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;

    for it in 0..opts.max_iters {
        let unit_step = project_to_density(&rho.op().add(&g)?);
        grad_norm = unit_step.op().sub(rho.op())?.frobenius_norm();
        if grad_norm <= opts.grad_tol {
            converged = true;
            break;
        }
        if history.len() > VALUE_WINDOW {
            let prev_val = history[history.len() - 1 - VALUE_WINDOW];
            if (value - prev_val).abs() <= opts.value_tol * value.abs().max(1.0) {
                converged = true;
                break;
            }
        }

        // Barzilai-Borwein warm start for the line search; the closed-form
        // inner solve makes the envelope's curvature vary by orders of
        // magnitude (weights 1/p reach n/eps near the boundary), and a
        // spectral step length tracks it far better than a fixed one.
        let mut a = match &prev {
            Some((rho_prev, g_prev)) => {
                let s = rho.op().sub(rho_prev.op())?;
                let y = g.sub(g_prev)?;
                let sy = hs_inner(&s, &y)?;
                let ss = hs_inner(&s, &s)?;
                if sy < -1e-30 * ss.max(1.0) {
                    (-ss / sy).clamp(1e-12, ALPHA_MAX)
                } else {
                    (alpha / beta).min(ALPHA_MAX)
                }
            }
            None => alpha.min(ALPHA_MAX),
        };
        let mut accepted = false;
        while a >= ALPHA_MIN {
            let candidate = project_to_density(&rho.op().add(&g.scale(a))?);
            let dir_inner = hs_inner(&g, &candidate.op().sub(rho.op())?)?;
            let (cand_value, cand_aux) = objective.value(&candidate)?;
            if dir_inner >= 0.0 && cand_value >= value + c * dir_inner {
                prev = Some((rho, g));
                rho = candidate;
                value = cand_value;
                aux = cand_aux;
                alpha = a;
                accepted = true;
                break;
            }
            a *= beta;
        }
        iterations = it + 1;
        if !accepted {
            // The line search underflowed: no f64-representable step along
            // the projected gradient improves the objective, so the iterate
            // is numerically stationary. Count it as converged (the value
            // cannot move) and report the residual gradient norm honestly.
            converged = true;
            break;
        }
        history.push(value);
        g = objective.gradient(&rho, &aux)?;
    }

    Ok(AscentOutcome {
        rho,
        value,
        iterations,
        converged,
        grad_norm,
        history,
    })
}

/// Best outcome over a list of starts (run in parallel); ties in value break
/// toward the lowest start index so the parallel reduction is deterministic.
fn ascend_multi<O: Objective>(
    starts: Vec<DensityMatrix>,
    objective: &O,
    opts: &MinimaxOptions,
) -> Result<(AscentOutcome, Vec<usize>)> {
    let outcomes: Vec<Result<AscentOutcome>> = starts
        .into_par_iter()
        .map(|s| ascend(s, objective, opts))
        .collect();
    let mut best: Option<AscentOutcome> = None;
    let mut iterations = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let outcome = outcome?;
        iterations.push(outcome.iterations);
        let better = match &best {
            None => true,
            Some(b) => outcome.value > b.value,
        };
        if better {
            best = Some(outcome);
        }
    }
    Ok((best.expect("at least one start"), iterations))
}

fn standard_starts(dim: usize, opts: &MinimaxOptions, stream_offset: u64) -> Vec<DensityMatrix> {
    let mut starts = Vec::with_capacity(opts.restarts);
    starts.push(DensityMatrix::maximally_mixed(dim));
    for i in 1..opts.restarts {
        let mut rng = stream_rng(opts.seed, stream_offset + i as u64);
        starts.push(random_density(dim, &mut rng));
    }
    starts
}

/// Euclidean gradient of the envelope `F(rho) = f(x*(rho), rho)` at `rho`:
/// `sum_j x*_j^2 E_j - 2 Tr(O rho) O`. Requires a regularized POVM so all
/// outcome probabilities are strictly positive at `rho`.
pub fn envelope_gradient(
    rho: &DensityMatrix,
    povm: &Povm,
    obs: &HermitianOperator,
) -> Result<HermitianOperator> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimMismatch {
            expected: povm.dim(),
            got: rho.dim(),
        });
    }
    let o = observable_coeffs(obs, povm.basis())?;
    let objective = EnvelopeObjective { povm, o, obs };
    let (_, x) = objective.value(rho)?;
    objective.gradient(rho, &x)
}

/// The envelope value `F(rho) = min_x f(x, rho)` itself; used by gradient
/// gates and certification tests.
pub fn envelope_value(rho: &DensityMatrix, povm: &Povm, obs: &HermitianOperator) -> Result<f64> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimMismatch {
            expected: povm.dim(),
            got: rho.dim(),
        });
    }
    let o = observable_coeffs(obs, povm.basis())?;
    let objective = EnvelopeObjective { povm, o, obs };
    Ok(objective.value(rho)?.0)
}

/// Maximizes the concave envelope over the spectrahedron and assembles the
/// full report: optimal value and coefficients, worst-case state (with its
/// numerical rank), duality-gap certificate, canonical worst case and the
/// two-sided benchmark bounds.
///
/// On iteration-cap exhaustion the best iterate is still packaged and
/// returned inside [`Error::NotConverged`]; the caller decides whether the
/// flagged result is acceptable.
pub fn maximize_over_states(
    povm: &Povm,
    obs: &HermitianOperator,
    opts: &MinimaxOptions,
) -> Result<MinimaxReport> {
    opts.validate()?;
    let t0 = Instant::now();
    let reg = povm.regularized(opts.eps_regularization)?;
    let o = observable_coeffs(obs, reg.basis())?;
    let dim = reg.dim();

    // Canonical worst case first: its ascent is cheap (no inner solves)
    // and its maximizer doubles as a physically informed warm start for
    // the envelope ascent below.
    let x_mp = canonical_coefficients(&reg, &o)?;
    let canonical_obj = FixedXObjective {
        s_x: reg.weighted_effect_sum(&x_mp.values().map(|v| v * v)),
        obs,
    };
    let canonical_starts = standard_starts(dim, opts, 1000);
    let (canonical_pre, _) = ascend_multi(canonical_starts, &canonical_obj, opts)?;

    let envelope = EnvelopeObjective {
        povm: &reg,
        o: o.clone(),
        obs,
    };
    let mut starts = standard_starts(dim, opts, 0);
    starts.push(canonical_pre.rho.clone());
    let (best, iterations_per_restart) = ascend_multi(starts, &envelope, opts)?;

    let rho_star = best.rho.clone();
    let p_star = reg.probabilities_raw(rho_star.entries());
    let (x_values, _) = optimal_coeffs_raw(&reg, &o, &p_star)?;
    let x_residual = (reg.rt_mul(&x_values) - &o).norm();
    let x_star = CoefficientVector::from_parts(x_values, reg.basis_hash(), x_residual);

    // Re-run the canonical adversary seeded with rho_star: since
    // f(x_MP, rho*) >= min_x f(x, rho*), this guarantees
    // canonical >= optimal up to solver numerics.
    let mut canonical_starts = vec![canonical_pre.rho.clone(), rho_star.clone()];
    canonical_starts.push(DensityMatrix::maximally_mixed(dim));
    let (canonical_best, _) = ascend_multi(canonical_starts, &canonical_obj, opts)?;

    // Duality gap: adversary's best against the returned x*, minus the
    // inner optimum at rho*. rho_star is among the starts, making the gap
    // nonnegative by construction.
    let gap_obj = FixedXObjective {
        s_x: reg.weighted_effect_sum(&x_star.values().map(|v| v * v)),
        obs,
    };
    let mut gap_starts = standard_starts(dim, opts, 2000);
    gap_starts.push(rho_star.clone());
    let (gap_best, _) = ascend_multi(gap_starts, &gap_obj, opts)?;
    let duality_gap = gap_best.value - best.value;

    let report = MinimaxReport {
        optimal_value: best.value,
        x_star,
        rho_star: rho_star.clone(),
        rho_rank: rho_star.numerical_rank(RANK_EIG_THRESHOLD),
        duality_gap,
        canonical_worst_case: canonical_best.value,
        appendix_e_bound: appendix_e_bound(obs),
        iterations_per_restart,
        objective_trace: best.history,
        wall_time: t0.elapsed().as_secs_f64(),
        converged: best.converged && canonical_best.converged && gap_best.converged,
        final_grad_norm: best.grad_norm,
    };
    if report.converged {
        Ok(report)
    } else {
        let value = report.optimal_value;
        let grad_norm = report.final_grad_norm;
        Err(Error::NotConverged {
            report: Some(Box::new(report)),
            value,
            grad_norm,
        })
    }
}

/// Worst-case variance of the canonical coefficients:
/// `max_rho f(x_MP, rho)` by the same projected ascent, at fixed
/// coefficients. Returns the value and the maximizing state.
pub fn canonical_worst_case(
    povm: &Povm,
    obs: &HermitianOperator,
    opts: &MinimaxOptions,
) -> Result<(f64, DensityMatrix)> {
    opts.validate()?;
    let reg = povm.regularized(opts.eps_regularization)?;
    let o = observable_coeffs(obs, reg.basis())?;
    let x_mp = canonical_coefficients(&reg, &o)?;
    let objective = FixedXObjective {
        s_x: reg.weighted_effect_sum(&x_mp.values().map(|v| v * v)),
        obs,
    };
    let starts = standard_starts(reg.dim(), opts, 1000);
    let (best, _) = ascend_multi(starts, &objective, opts)?;
    if best.converged {
        Ok((best.value, best.rho))
    } else {
        Err(Error::NotConverged {
            report: None,
            value: best.value,
            grad_norm: best.grad_norm,
        })
    }
}

/// Duality gap `max_rho' f(x, rho') - min_x' f(x', rho)` at a candidate
/// saddle `(x, rho)`. The first term runs the fixed-coefficient ascent
/// (seeded with `rho` among the starts), the second is the closed-form
/// inner minimum. Nonnegative for any feasible pair; small exactly at a
/// saddle. The POVM is used as given — pass the regularized POVM the
/// candidate was computed on.
pub fn saddle_certificate(
    x: &CoefficientVector,
    rho: &DensityMatrix,
    povm: &Povm,
    obs: &HermitianOperator,
    opts: &MinimaxOptions,
) -> Result<f64> {
    opts.validate()?;
    x.check_against(povm)?;
    if rho.dim() != povm.dim() {
        return Err(Error::DimMismatch {
            expected: povm.dim(),
            got: rho.dim(),
        });
    }
    let o = observable_coeffs(obs, povm.basis())?;
    let objective = FixedXObjective {
        s_x: povm.weighted_effect_sum(&x.values().map(|v| v * v)),
        obs,
    };
    let mut starts = standard_starts(povm.dim(), opts, 3000);
    starts.push(rho.clone());
    let (best, _) = ascend_multi(starts, &objective, opts)?;
    let p = povm.probabilities_raw(rho.entries());
    let inner_min =
        optimal_objective_raw(povm, &o, &p)? - hs_inner_raw(obs.entries(), rho.entries()).powi(2);
    let gap = best.value - inner_min;
    if !best.converged {
        return Err(Error::NotConverged {
            report: None,
            value: gap,
            grad_norm: best.grad_norm,
        });
    }
    Ok(gap)
}

/// `(lambda_max - lambda_min)^2 / 4`: the maximal variance of the
/// observable itself over all states, the floor any estimator-variance
/// bound is compared against.
pub fn appendix_e_bound(obs: &HermitianOperator) -> f64 {
    let ev = obs.eigenvalues();
    let lo = ev[0];
    let hi = ev[ev.len() - 1];
    0.25 * (hi - lo) * (hi - lo)
}

/// Randomized concavity check of `f(x, .)` at fixed coefficients: for
/// random state pairs and mixing weights,
/// `f(x, lam rho1 + (1-lam) rho2) >= lam f(x, rho1) + (1-lam) f(x, rho2)`
/// up to `slack`. Returns violation statistics (zero expected).
pub fn concavity_probe(
    x: &CoefficientVector,
    povm: &Povm,
    obs: &HermitianOperator,
    trials: usize,
    slack: f64,
    seed: u64,
) -> Result<ProbeStats> {
    use rand::Rng;
    x.check_against(povm)?;
    let o = observable_coeffs(obs, povm.basis())?;
    let feas = (povm.rt_mul(x.values()) - &o).norm();
    if feas > crate::frame::FEASIBILITY_TOL {
        return Err(Error::Infeasible { residual: feas });
    }
    let dim = povm.dim();
    let mut rng = stream_rng(seed, 0);
    let mut violations = 0;
    let mut max_violation = 0.0_f64;
    for _ in 0..trials {
        let rho1 = random_density(dim, &mut rng);
        let rho2 = random_density(dim, &mut rng);
        let lam: f64 = rng.gen_range(0.0..1.0);
        let mixed = HermitianOperator::from_matrix_unchecked(
            rho1.entries() * num_complex::Complex64::new(lam, 0.0)
                + rho2.entries() * num_complex::Complex64::new(1.0 - lam, 0.0),
        );
        let f_mix = variance_raw(x.values(), &povm.probabilities_raw(mixed.entries()));
        let f1 = variance_raw(x.values(), &povm.probabilities_raw(rho1.entries()));
        let f2 = variance_raw(x.values(), &povm.probabilities_raw(rho2.entries()));
        let gap = lam * f1 + (1.0 - lam) * f2 - f_mix;
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
