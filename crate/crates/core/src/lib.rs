//! Variance-optimal classical post-processing for POVM-based shadow
//! estimation.
//!
//! Once a measurement scheme (a POVM) is fixed and a target observable is
//! chosen, any coefficient vector `x` with `sum_j x_j E_j = O` yields an
//! unbiased linear estimator of `Tr(O rho)` from outcome frequencies. When
//! the POVM is informationally overcomplete there are infinitely many such
//! vectors, and they differ in variance. This crate computes the coefficient
//! vector minimizing the *worst-case* variance over all quantum states,
//! certifies the resulting saddle point, and provides a Monte-Carlo layer to
//! validate the bounds by sampling.
//!
//! Module map:
//! - [`operator`]: Hermitian matrices and the Hilbert-Schmidt inner product.
//! - [`basis`]: orthonormal operator bases and observable decomposition.
//! - [`povm`]: POVM construction, tensor products, coefficient matrices.
//! - [`state`]: density matrices and spectrahedron projection.
//! - [`frame`]: dual frames, canonical and state-optimal coefficients, the
//!   variance functional, a KKT oracle for the inner quadratic program.
//! - [`minimax`]: concave maximization over states, saddle certification,
//!   benchmark bounds.
//! - [`sim`]: outcome sampling, median-of-means, sample-size bounds.
//! - [`random`]: seeded generators for states, observables and POVMs, used
//!   by property suites.

pub mod basis;
pub mod error;
pub mod frame;
pub mod minimax;
pub mod numeric;
pub mod operator;
pub mod povm;
pub mod random;
pub mod rng;
pub mod sim;
pub mod state;

pub use basis::{observable_coeffs, pauli_basis_xz, tensor_basis, OperatorBasis};
pub use error::{Error, Result};
pub use frame::{
    canonical_coefficients, dual_frame, optimal_coefficients_for_state, probabilities,
    qp_inner_oracle, regularize_povm, shadow_norm_bound, variance, CoefficientVector, DualFrame,
    ProbabilityVector,
};
pub use minimax::{
    appendix_e_bound, canonical_worst_case, concavity_probe, envelope_gradient, envelope_value,
    maximize_over_states, saddle_certificate, MinimaxOptions, MinimaxReport,
};
pub use operator::{hs_inner, HermitianOperator};
pub use povm::{build_xz_povm, coefficient_matrix, tensor_povm, Povm};
pub use sim::{
    coverage_test, estimate, hoeffding_sample_size, median_of_means, sample_outcomes,
    OutcomeCounts, SampleSizeQuery,
};
pub use state::DensityMatrix;
