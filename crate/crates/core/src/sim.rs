//! Monte-Carlo validation layer: outcome sampling, the classical estimator,
//! median-of-means aggregation and Hoeffding sample sizing.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{probabilities, CoefficientVector, ProbabilityVector};
use crate::numeric::compensated_sum;
use crate::povm::Povm;
use crate::rng::stream_rng;
use crate::state::DensityMatrix;

/// Occurrence counts `k_j` of each POVM outcome over `K` shots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCounts {
    counts: Vec<u64>,
    total: u64,
}

impl OutcomeCounts {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Inputs of the Hoeffding sample-size bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizeQuery {
    /// Variance bound sigma^2 on the single-shot estimator.
    pub sigma_sq: f64,
    /// Target accuracy epsilon.
    pub epsilon: f64,
    /// Failure tolerance delta.
    pub delta: f64,
    /// Number of observables estimated from the same data.
    pub m_observables: u64,
}

impl SampleSizeQuery {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidOptions {
            reason: reason.into(),
        };
        if !(self.sigma_sq >= 0.0) {
            return Err(bad("sigma_sq must be nonnegative"));
        }
        if !(self.epsilon > 0.0) {
            return Err(bad("epsilon must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(bad("delta must lie in (0, 1)"));
        }
        if self.m_observables == 0 {
            return Err(bad("m_observables must be at least 1"));
        }
        Ok(())
    }
}

/// Multinomial draw via inverse-CDF on the cumulative distribution, one
/// uniform per shot.
fn multinomial<R: Rng>(p: &DVector<f64>, shots: u64, rng: &mut R) -> Vec<u64> {
    let n = p.len();
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0_f64;
    for &v in p.iter() {
        acc += v.max(0.0);
        cdf.push(acc);
    }
    let norm = acc;
    let mut counts = vec![0u64; n];
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * norm;
        let idx = cdf.partition_point(|&c| c <= u).min(n - 1);
        counts[idx] += 1;
    }
    counts
}

/// Samples `k` POVM outcomes from `p(rho)`; deterministic given the seed
/// (stream 0 of the seed).
pub fn sample_outcomes(
    rho: &DensityMatrix,
    povm: &Povm,
    k: u64,
    seed: u64,
) -> Result<OutcomeCounts> {
    if k == 0 {
        return Err(Error::EmptySample);
    }
    let p = probabilities(rho, povm)?;
    let mut rng = stream_rng(seed, 0);
    Ok(OutcomeCounts::new(multinomial(p.values(), k, &mut rng)))
}

/// The classical estimator `sum_j (k_j / K) x_j` built from outcome
/// frequencies; its expectation over sampling is `Tr(O rho)`.
pub fn estimate(counts: &OutcomeCounts, x: &CoefficientVector) -> Result<f64> {
    if counts.len() != x.len() {
        return Err(Error::LenMismatch {
            expected: x.len(),
            got: counts.len(),
        });
    }
    if counts.total() == 0 {
        return Err(Error::EmptySample);
    }
    let k = counts.total() as f64;
    Ok(compensated_sum(
        counts
            .counts()
            .iter()
            .zip(x.values().iter())
            .map(|(&c, &xj)| (c as f64 / k) * xj),
    ))
}

/// Median-of-means: split `k_total` shots into `batches` equal batches,
/// estimate each, return the median. `batches = 1` reduces to a single
/// [`estimate`] over the same stream as [`sample_outcomes`].
pub fn median_of_means(
    rho: &DensityMatrix,
    povm: &Povm,
    x: &CoefficientVector,
    k_total: u64,
    batches: usize,
    seed: u64,
) -> Result<f64> {
    if batches == 0 || batches % 2 == 0 {
        return Err(Error::BatchesNotOdd { batches });
    }
    if k_total == 0 {
        return Err(Error::EmptySample);
    }
    if k_total % batches as u64 != 0 {
        return Err(Error::NotDivisible {
            total: k_total,
            batches,
        });
    }
    let per_batch = k_total / batches as u64;
    let p = probabilities(rho, povm)?;
    // Batches own disjoint RNG streams, so the parallel result matches the
    // sequential one.
    let mut means = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let counts = OutcomeCounts::new(multinomial(p.values(), per_batch, &mut rng));
            estimate(&counts, x)
        })
        .collect::<Result<Vec<f64>>>()?;
    means.sort_by(|a, b| a.partial_cmp(b).expect("finite estimates"));
    Ok(means[batches / 2])
}

/// Hoeffding sample size `K = ceil( (2 sigma^2 / eps^2) ln(2M / delta) )`,
/// clamped to at least one shot.
pub fn hoeffding_sample_size(q: &SampleSizeQuery) -> Result<u64> {
    q.validate()?;
    let ln_term = (2.0 * q.m_observables as f64 / q.delta).ln();
    let k = (2.0 * q.sigma_sq / (q.epsilon * q.epsilon) * ln_term).ceil();
    Ok((k as u64).max(1))
}

/// Fraction of `trials` independent K-shot estimates landing within
/// `epsilon` of the exact expectation `sum_j p_j x_j`. Trial `t` draws from
/// stream `(seed, t)`.
pub fn coverage_test(
    rho: &DensityMatrix,
    povm: &Povm,
    x: &CoefficientVector,
    epsilon: f64,
    trials: usize,
    k: u64,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidOptions {
            reason: "trials must be at least 1".into(),
        });
    }
    if k == 0 {
        return Err(Error::EmptySample);
    }
    let p = probabilities(rho, povm)?;
    let truth = exact_expectation(&p, x)?;
    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let counts = OutcomeCounts::new(multinomial(p.values(), k, &mut rng));
            let est = estimate(&counts, x).expect("lengths verified above");
            usize::from((est - truth).abs() <= epsilon)
        })
        .sum();
    Ok(hits as f64 / trials as f64)
}

/// `sum_j p_j x_j`, the exact expectation of the estimator.
pub fn exact_expectation(p: &ProbabilityVector, x: &CoefficientVector) -> Result<f64> {
    if p.len() != x.len() {
        return Err(Error::LenMismatch {
            expected: x.len(),
            got: p.len(),
        });
    }
    Ok(compensated_sum(
        p.values()
            .iter()
            .zip(x.values().iter())
            .map(|(&pj, &xj)| pj * xj),
    ))
}
