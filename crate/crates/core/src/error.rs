use thiserror::Error;

use crate::minimax::MinimaxReport;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LenMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max |A - A^dagger| = {max_asym:.3e})")]
    NotHermitian { max_asym: f64 },

    #[error("operator is not positive semi-definite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("basis is not orthonormal (max Gram deviation {max_dev:.3e} > tol {tol:.3e})")]
    NotOrthonormal { max_dev: f64, tol: f64 },

    #[error("effects do not sum to the identity (max |sum - I| = {max_dev:.3e})")]
    EffectSumNotIdentity { max_dev: f64 },

    #[error("effect {index} lies outside the basis span (projection residual {residual:.3e})")]
    EffectOutsideSpan { index: usize, residual: f64 },

    #[error("observable lies outside the POVM span (projection residual {residual:.3e})")]
    ObservableOutsideSpan { residual: f64 },

    #[error("coefficient system is rank deficient (condition estimate {cond:.3e})")]
    RankDeficient { cond: f64 },

    #[error("probabilities at or below the floor at indices {indices:?}")]
    ZeroProbability { indices: Vec<usize> },

    #[error("KKT saddle system is numerically singular")]
    SingularKkt,

    #[error("matrix is not a pseudo-inverse of R (|R^T L - I| = {deviation:.3e})")]
    NotPseudoInverse { deviation: f64 },

    #[error("coefficient vector is infeasible (constraint residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("coefficient vector was built against a different basis")]
    BasisMismatch,

    #[error("regularization strength {eps} outside [0, 1)")]
    EpsOutOfRange { eps: f64 },

    #[error("tensor product would produce {count} effects, above the cap {cap}")]
    EffectCountOverflow { count: u128, cap: usize },

    #[error("invalid options: {reason}")]
    InvalidOptions { reason: String },

    #[error("no samples: K must be at least 1")]
    EmptySample,

    #[error("median of means requires an odd batch count, got {batches}")]
    BatchesNotOdd { batches: usize },

    #[error("total sample size {total} is not divisible by {batches} batches")]
    NotDivisible { total: u64, batches: usize },

    /// The outer ascent hit its iteration cap. The best value found (and,
    /// for full solves, the flagged report) rides along with the final
    /// projected-gradient norm; the caller decides acceptability.
    #[error("outer maximization did not converge (best value {value}, projected-gradient norm {grad_norm:.3e})")]
    NotConverged {
        report: Option<Box<MinimaxReport>>,
        value: f64,
        grad_norm: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
