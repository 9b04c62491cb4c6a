//! Parsing of built-in problem names and operator files for `optimize`
//! and `sample`.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;
use shadowopt::operator::HermitianOperator;
use shadowopt::povm::{build_xz_povm, tensor_povm_power, Povm, DEFAULT_TENSOR_CAP};

use crate::error::CliError;
use crate::experiments::{plane_projector, sigma_theta, HARD_MAX_QUBITS};

/// `xz` or `xz^N`: the N-fold tensor power of the X/Z eigenstate POVM.
pub fn parse_builtin_povm(spec: &str, max_qubits: usize) -> Result<(Povm, usize), CliError> {
    let (name, power) = match spec.split_once('^') {
        Some((name, pow)) => {
            let n: usize = pow
                .parse()
                .map_err(|_| CliError::Validation(format!("bad tensor power in '{spec}'")))?;
            (name, n)
        }
        None => (spec, 1),
    };
    if name != "xz" {
        return Err(CliError::Validation(format!(
            "unknown builtin POVM '{name}' (available: xz, xz^N)"
        )));
    }
    if power < 1 || power > max_qubits.min(HARD_MAX_QUBITS) {
        return Err(CliError::Validation(format!(
            "tensor power {power} outside 1..={}",
            max_qubits.min(HARD_MAX_QUBITS)
        )));
    }
    let povm = tensor_povm_power(&build_xz_povm(), power, DEFAULT_TENSOR_CAP)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((povm, power))
}

/// Observable specs: `Z`, `X`, `I` (single qubit), `product:<theta>`
/// (plane projector tensored over all qubits), `paulisum:<theta>` (sum of
/// rotated local Paulis).
pub fn parse_observable(spec: &str, n_qubits: usize) -> Result<HermitianOperator, CliError> {
    let single = |op: HermitianOperator| -> Result<HermitianOperator, CliError> {
        if n_qubits != 1 {
            return Err(CliError::Validation(format!(
                "observable '{spec}' is single-qubit but the POVM covers {n_qubits} qubits; \
                 use product:<theta> or paulisum:<theta>"
            )));
        }
        Ok(op)
    };
    if let Some((kind, theta_text)) = spec.split_once(':') {
        let theta: f64 = theta_text
            .parse()
            .map_err(|_| CliError::Validation(format!("bad theta in '{spec}'")))?;
        return match kind {
            "product" => {
                let one = plane_projector(theta);
                let mut obs = one.clone();
                for _ in 1..n_qubits {
                    obs = obs.kron(&one);
                }
                Ok(obs)
            }
            "paulisum" => {
                let one = sigma_theta(theta);
                let id = HermitianOperator::identity(2);
                let mut obs = HermitianOperator::zero(1 << n_qubits);
                for site in 0..n_qubits {
                    let mut term: Option<HermitianOperator> = None;
                    for k in 0..n_qubits {
                        let f = if k == site { one.clone() } else { id.clone() };
                        term = Some(match term {
                            None => f,
                            Some(acc) => acc.kron(&f),
                        });
                    }
                    obs = obs
                        .add(&term.expect("n_qubits >= 1"))
                        .map_err(|e| CliError::Validation(e.to_string()))?;
                }
                Ok(obs)
            }
            other => Err(CliError::Validation(format!(
                "unknown observable family '{other}'"
            ))),
        };
    }
    match spec {
        "Z" => single(HermitianOperator::pauli_z()),
        "X" => single(HermitianOperator::pauli_x()),
        "I" => single(HermitianOperator::identity(2)),
        other => Err(CliError::Validation(format!(
            "unknown observable '{other}' (available: Z, X, I, product:<theta>, paulisum:<theta>)"
        ))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    dim: usize,
    /// Row-major entries as [re, im] pairs.
    entries: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PovmFile {
    dim: usize,
    /// One row-major [re, im] entry list per effect.
    effects: Vec<Vec<[f64; 2]>>,
}

fn matrix_from_pairs(dim: usize, pairs: &[[f64; 2]]) -> Result<DMatrix<Complex64>, CliError> {
    if pairs.len() != dim * dim {
        return Err(CliError::Validation(format!(
            "expected {} entries for a {dim}x{dim} matrix, got {}",
            dim * dim,
            pairs.len()
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        let [re, im] = pairs[i * dim + j];
        Complex64::new(re, im)
    }))
}

/// Loads a Hermitian observable from a JSON file
/// (`{"dim": d, "entries": [[re, im], ...]}`, row-major).
pub fn load_observable(path: &Path) -> Result<HermitianOperator, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let parsed: OperatorFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("invalid observable file: {e}")))?;
    let m = matrix_from_pairs(parsed.dim, &parsed.entries)?;
    HermitianOperator::from_matrix(m).map_err(|e| CliError::Validation(e.to_string()))
}

/// Loads a POVM from a JSON file
/// (`{"dim": d, "effects": [[[re, im], ...], ...]}`); the span basis is
/// derived from the effects.
pub fn load_povm(path: &Path) -> Result<Povm, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let parsed: PovmFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("invalid POVM file: {e}")))?;
    let mut effects = Vec::with_capacity(parsed.effects.len());
    for pairs in &parsed.effects {
        let m = matrix_from_pairs(parsed.dim, pairs)?;
        effects
            .push(HermitianOperator::from_matrix(m).map_err(|e| CliError::Validation(e.to_string()))?);
    }
    Povm::with_auto_basis(effects).map_err(|e| CliError::Validation(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tensor_powers_parse() {
        let (p1, n1) = parse_builtin_povm("xz", 5).unwrap();
        assert_eq!((p1.len(), n1), (4, 1));
        let (p2, n2) = parse_builtin_povm("xz^2", 5).unwrap();
        assert_eq!((p2.len(), n2), (16, 2));
        assert!(parse_builtin_povm("xz^9", 5).is_err());
        assert!(parse_builtin_povm("sic", 5).is_err());
    }

    #[test]
    fn single_qubit_names_require_single_qubit_povm() {
        assert!(parse_observable("Z", 1).is_ok());
        assert!(parse_observable("Z", 2).is_err());
        assert!(parse_observable("product:0.5", 2).is_ok());
        assert!(parse_observable("paulisum:0.5", 3).is_ok());
        assert!(parse_observable("W", 1).is_err());
        assert!(parse_observable("product:abc", 1).is_err());
    }

    #[test]
    fn observable_files_roundtrip() {
        let dir = std::env::temp_dir().join("shadowopt-input-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("obs.json");
        std::fs::write(
            &path,
            r#"{"dim": 2, "entries": [[1.0, 0.0], [0.0, -0.5], [0.0, 0.5], [-1.0, 0.0]]}"#,
        )
        .unwrap();
        let op = load_observable(&path).unwrap();
        assert_eq!(op.dim(), 2);
        assert!((op.entries()[(0, 1)].im - -0.5).abs() < 1e-15);
    }
}
