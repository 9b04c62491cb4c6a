//! The two experiment families: tensor powers of plane projectors, and sums
//! of parametrized local Pauli observables, both measured with tensor
//! powers of the X/Z eigenstate POVM.

use nalgebra::DVector;
use num_complex::Complex64;
use shadowopt::basis::observable_coeffs;
use shadowopt::error::{Error, Result};
use shadowopt::frame::{canonical_coefficients, CoefficientVector};
use shadowopt::operator::HermitianOperator;
use shadowopt::povm::{build_xz_povm, tensor_povm_power, Povm, DEFAULT_TENSOR_CAP};

/// Default qubit ceiling: 4^5 = 1024 effects with a 243-dimensional span
/// stays comfortable on a workstation with dense algebra.
pub const DEFAULT_MAX_QUBITS: usize = 5;

/// Absolute ceiling behind `--allow-large`; coefficient rows and effects
/// materialize lazily in this range.
pub const HARD_MAX_QUBITS: usize = 7;

/// `sigma(theta) = cos(theta/2) X + sin(theta/2) Z`.
pub fn sigma_theta(theta: f64) -> HermitianOperator {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    HermitianOperator::pauli_x()
        .scale(c)
        .add(&HermitianOperator::pauli_z().scale(s))
        .expect("same dim")
}

/// Projector onto `cos(theta/2)|0> + sin(theta/2)|1>`, a pure state on the
/// prime meridian of the Bloch sphere.
pub fn plane_projector(theta: f64) -> HermitianOperator {
    let ket = [
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::new((theta / 2.0).sin(), 0.0),
    ];
    HermitianOperator::projector(&ket)
}

fn check_qubits(n_qubits: usize, max_qubits: usize) -> Result<()> {
    if n_qubits < 1 {
        return Err(Error::InvalidOptions {
            reason: "n_qubits must be at least 1".into(),
        });
    }
    if n_qubits > max_qubits {
        return Err(Error::EffectCountOverflow {
            count: 4u128.pow(n_qubits as u32),
            cap: 4usize.pow(max_qubits.min(HARD_MAX_QUBITS) as u32),
        });
    }
    Ok(())
}

fn check_theta(theta: f64, hi: f64) -> Result<()> {
    if !(0.0..=hi).contains(&theta) {
        return Err(Error::InvalidOptions {
            reason: format!("theta {theta} outside [0, {hi}]"),
        });
    }
    Ok(())
}

/// N-qubit product-observable instance: the N-fold XZ POVM and
/// `O(theta)^{tensor N}` with `O(theta)` the plane projector.
pub fn product_observable(theta: f64, n_qubits: usize) -> Result<(Povm, HermitianOperator)> {
    product_observable_with_limit(theta, n_qubits, DEFAULT_MAX_QUBITS)
}

pub fn product_observable_with_limit(
    theta: f64,
    n_qubits: usize,
    max_qubits: usize,
) -> Result<(Povm, HermitianOperator)> {
    check_theta(theta, std::f64::consts::PI)?;
    check_qubits(n_qubits, max_qubits.min(HARD_MAX_QUBITS))?;
    let povm = tensor_povm_power(&build_xz_povm(), n_qubits, DEFAULT_TENSOR_CAP)?;
    let single = plane_projector(theta);
    let mut obs = single.clone();
    for _ in 1..n_qubits {
        obs = obs.kron(&single);
    }
    Ok((povm, obs))
}

/// N-qubit Pauli-sum instance: the N-fold XZ POVM and
/// `O = sum_i sigma_i(theta)` with `sigma(theta)` embedded at site i.
pub fn pauli_sum_observable(theta: f64, n_qubits: usize) -> Result<(Povm, HermitianOperator)> {
    pauli_sum_observable_with_limit(theta, n_qubits, DEFAULT_MAX_QUBITS)
}

pub fn pauli_sum_observable_with_limit(
    theta: f64,
    n_qubits: usize,
    max_qubits: usize,
) -> Result<(Povm, HermitianOperator)> {
    check_theta(theta, std::f64::consts::FRAC_PI_2)?;
    check_qubits(n_qubits, max_qubits.min(HARD_MAX_QUBITS))?;
    let povm = tensor_povm_power(&build_xz_povm(), n_qubits, DEFAULT_TENSOR_CAP)?;
    let single = sigma_theta(theta);
    let id = HermitianOperator::identity(2);
    let dim = 1usize << n_qubits;
    let mut obs = HermitianOperator::zero(dim);
    for site in 0..n_qubits {
        let mut term: Option<HermitianOperator> = None;
        for k in 0..n_qubits {
            let factor = if k == site { single.clone() } else { id.clone() };
            term = Some(match term {
                None => factor,
                Some(acc) => acc.kron(&factor),
            });
        }
        obs = obs.add(&term.expect("n_qubits >= 1"))?;
    }
    Ok((povm, obs))
}

fn kron_vecs(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() * b.len());
    let mut idx = 0;
    for &x in a.iter() {
        for &y in b.iter() {
            out[idx] = x * y;
            idx += 1;
        }
    }
    out
}

/// Canonical coefficients of the product observable in product form,
/// `x^(N) = x^{tensor N}` of the single-qubit canonical vector. Feasibility
/// for the tensor problem is verified at construction; agreement with the
/// tensor problem's own canonical solution is covered by tests rather than
/// assumed.
pub fn canonical_product_coefficients(theta: f64, n_qubits: usize) -> Result<CoefficientVector> {
    let (povm, _) = product_observable(theta, n_qubits)?;
    canonical_product_coefficients_for(&povm, theta, n_qubits)
}

/// As [`canonical_product_coefficients`], reusing an already-built N-fold
/// XZ POVM.
pub fn canonical_product_coefficients_for(
    povm: &Povm,
    theta: f64,
    n_qubits: usize,
) -> Result<CoefficientVector> {
    let single_povm = build_xz_povm();
    let single_obs = plane_projector(theta);
    let o_single = observable_coeffs(&single_obs, single_povm.basis())?;
    let x_single = canonical_coefficients(&single_povm, &o_single)?;
    let mut x = x_single.values().clone();
    let mut o = o_single.clone();
    for _ in 1..n_qubits {
        x = kron_vecs(&x, x_single.values());
        o = kron_vecs(&o, &o_single);
    }
    CoefficientVector::new(x, povm, &o)
}

/// Canonical coefficients of the Pauli-sum observable in composed form:
/// `c^(N) = sum_i ones^(i-1) kron c kron ones^(N-i)`, where `ones` is the
/// all-ones vector (the coefficients reconstructing the identity from the
/// XZ POVM) and `c` the single-qubit canonical vector of `sigma(theta)`.
pub fn canonical_sum_coefficients(theta: f64, n_qubits: usize) -> Result<CoefficientVector> {
    let (povm, _) = pauli_sum_observable(theta, n_qubits)?;
    canonical_sum_coefficients_for(&povm, theta, n_qubits)
}

/// As [`canonical_sum_coefficients`], reusing an already-built POVM.
pub fn canonical_sum_coefficients_for(
    povm: &Povm,
    theta: f64,
    n_qubits: usize,
) -> Result<CoefficientVector> {
    let single_povm = build_xz_povm();
    let o_single = observable_coeffs(&sigma_theta(theta), single_povm.basis())?;
    let c_single = canonical_coefficients(&single_povm, &o_single)?;
    let ones = DVector::from_element(4, 1.0);
    let id_coeffs = single_povm.identity_coeffs().clone();

    let n_total = 4usize.pow(n_qubits as u32);
    let d_total = 3usize.pow(n_qubits as u32);
    let mut c_sum = DVector::zeros(n_total);
    let mut o_sum = DVector::zeros(d_total);
    for site in 0..n_qubits {
        let mut c_term = DVector::from_element(1, 1.0);
        let mut o_term = DVector::from_element(1, 1.0);
        for k in 0..n_qubits {
            if k == site {
                c_term = kron_vecs(&c_term, c_single.values());
                o_term = kron_vecs(&o_term, &o_single);
            } else {
                c_term = kron_vecs(&c_term, &ones);
                o_term = kron_vecs(&o_term, &id_coeffs);
            }
        }
        c_sum += c_term;
        o_sum += o_term;
    }
    CoefficientVector::new(c_sum, povm, &o_sum)
}
