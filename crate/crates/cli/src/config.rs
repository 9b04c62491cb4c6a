//! JSON experiment configuration: strict schema, defaults, validation.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use shadowopt::minimax::MinimaxOptions;

use crate::error::CliError;

/// Which experiment family a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "product_observable")]
    ProductObservable,
    #[serde(rename = "pauli_sum")]
    PauliSum,
    #[serde(rename = "single")]
    Single,
}

impl ExperimentKind {
    /// Label used in CSV rows and file names.
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::ProductObservable => "product_observable",
            ExperimentKind::PauliSum => "pauli_sum",
            ExperimentKind::Single => "single",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMinimax {
    max_iters: Option<usize>,
    grad_tol: Option<f64>,
    value_tol: Option<f64>,
    restarts: Option<usize>,
    eps_regularization: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    csv_path: PathBuf,
    #[serde(default)]
    svg_path: Option<PathBuf>,
    report_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentKind,
    #[serde(default)]
    theta_grid: Option<Vec<f64>>,
    #[serde(default)]
    theta_count: Option<usize>,
    n_qubits: Vec<usize>,
    #[serde(default)]
    minimax: Option<RawMinimax>,
    seed: u64,
    outputs: RawOutputs,
}

/// Validated sweep configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub theta_grid: Vec<f64>,
    pub n_qubits: Vec<usize>,
    pub minimax: MinimaxOptions,
    pub seed: u64,
    pub csv_path: PathBuf,
    pub svg_path: Option<PathBuf>,
    pub report_dir: PathBuf,
}

impl ExperimentConfig {
    /// Reads and validates a config file. I/O failures (missing or
    /// unreadable file) and schema/semantic problems are reported as
    /// distinct error categories so the process exit code can distinguish
    /// them.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let raw: RawConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let theta_grid = match (&raw.theta_grid, raw.theta_count) {
            (Some(_), Some(_)) => {
                return Err(CliError::Validation(
                    "specify exactly one of theta_grid and theta_count".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Validation(
                    "one of theta_grid or theta_count is required".into(),
                ))
            }
            (Some(grid), None) => grid.clone(),
            (None, Some(count)) => {
                if count == 0 {
                    return Err(CliError::Validation("theta_count must be positive".into()));
                }
                // s / count * (pi/2) for s = 1..count.
                (1..=count)
                    .map(|s| s as f64 / count as f64 * std::f64::consts::FRAC_PI_2)
                    .collect()
            }
        };
        if theta_grid.is_empty() {
            return Err(CliError::Validation("theta_grid must be non-empty".into()));
        }
        for &t in &theta_grid {
            if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&t) {
                return Err(CliError::Validation(format!(
                    "theta {t} outside [0, pi/2]"
                )));
            }
        }
        if raw.n_qubits.is_empty() {
            return Err(CliError::Validation("n_qubits must be non-empty".into()));
        }
        if raw.n_qubits.iter().any(|&n| n < 1) {
            return Err(CliError::Validation("every n_qubits must be >= 1".into()));
        }
        if raw.experiment == ExperimentKind::Single
            && (theta_grid.len() != 1 || raw.n_qubits.len() != 1)
        {
            return Err(CliError::Validation(
                "the single experiment takes exactly one theta and one n_qubits".into(),
            ));
        }

        let defaults = MinimaxOptions::default();
        let m = raw.minimax.unwrap_or_default();
        let minimax = MinimaxOptions {
            max_iters: m.max_iters.unwrap_or(defaults.max_iters),
            grad_tol: m.grad_tol.unwrap_or(defaults.grad_tol),
            value_tol: m.value_tol.unwrap_or(defaults.value_tol),
            restarts: m.restarts.unwrap_or(defaults.restarts),
            eps_regularization: m
                .eps_regularization
                .unwrap_or(defaults.eps_regularization),
            seed: raw.seed,
            ..defaults
        };
        minimax
            .validate()
            .map_err(|e| CliError::Validation(format!("invalid minimax options: {e}")))?;

        Ok(Self {
            experiment: raw.experiment,
            theta_grid,
            n_qubits: raw.n_qubits.clone(),
            minimax,
            seed: raw.seed,
            csv_path: raw.outputs.csv_path,
            svg_path: raw.outputs.svg_path,
            report_dir: raw.outputs.report_dir,
        })
    }

    /// Re-roots relative output paths under `base`.
    pub fn rebase_outputs(&mut self, base: &Path) {
        if self.csv_path.is_relative() {
            self.csv_path = base.join(&self.csv_path);
        }
        if let Some(svg) = &self.svg_path {
            if svg.is_relative() {
                self.svg_path = Some(base.join(svg));
            }
        }
        if self.report_dir.is_relative() {
            self.report_dir = base.join(&self.report_dir);
        }
    }

    /// Creates output directories and verifies the CSV target is writable.
    pub fn prepare_outputs(&self) -> Result<(), CliError> {
        let check_parent = |p: &Path| -> Result<(), CliError> {
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| {
                        CliError::Io(format!("cannot create {}: {e}", parent.display()))
                    })?;
                }
            }
            Ok(())
        };
        check_parent(&self.csv_path)?;
        if let Some(svg) = &self.svg_path {
            check_parent(svg)?;
        }
        std::fs::create_dir_all(&self.report_dir).map_err(|e| {
            CliError::Io(format!(
                "cannot create report dir {}: {e}",
                self.report_dir.display()
            ))
        })?;
        // Probe writability now instead of failing after minutes of work.
        let probe = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.csv_path)
            .map_err(|e| {
                CliError::Io(format!("cannot write {}: {e}", self.csv_path.display()))
            })?;
        drop(probe);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "experiment": "product_observable",
            "theta_grid": [0.0, 0.5],
            "n_qubits": [1, 2],
            "seed": 7,
            "outputs": {"csv_path": "out.csv", "report_dir": "reports"}
        })
    }

    fn parse(v: serde_json::Value) -> Result<ExperimentConfig, CliError> {
        let raw: RawConfig =
            serde_json::from_value(v).map_err(|e| CliError::Validation(e.to_string()))?;
        ExperimentConfig::from_raw(raw)
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse(minimal_json()).unwrap();
        assert_eq!(cfg.minimax.restarts, MinimaxOptions::default().restarts);
        assert_eq!(cfg.minimax.seed, 7);
        assert!(cfg.svg_path.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = minimal_json();
        v["surprise"] = serde_json::json!(1);
        assert!(parse(v).is_err());
    }

    #[test]
    fn unknown_nested_keys_are_rejected() {
        let mut v = minimal_json();
        v["minimax"] = serde_json::json!({"stepsize": 0.1});
        assert!(parse(v).is_err());
    }

    #[test]
    fn theta_count_builds_the_fig1_grid() {
        let mut v = minimal_json();
        v.as_object_mut().unwrap().remove("theta_grid");
        v["theta_count"] = serde_json::json!(30);
        let cfg = parse(v).unwrap();
        assert_eq!(cfg.theta_grid.len(), 30);
        let expect_first = 1.0 / 30.0 * std::f64::consts::FRAC_PI_2;
        assert!((cfg.theta_grid[0] - expect_first).abs() < 1e-15);
        assert!((cfg.theta_grid[29] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn both_theta_forms_is_an_error() {
        let mut v = minimal_json();
        v["theta_count"] = serde_json::json!(5);
        assert!(parse(v).is_err());
    }

    #[test]
    fn empty_qubit_list_is_an_error() {
        let mut v = minimal_json();
        v["n_qubits"] = serde_json::json!([]);
        assert!(parse(v).is_err());
    }

    #[test]
    fn theta_outside_range_is_an_error() {
        let mut v = minimal_json();
        v["theta_grid"] = serde_json::json!([2.0]);
        assert!(parse(v).is_err());
    }

    #[test]
    fn single_requires_one_point() {
        let mut v = minimal_json();
        v["experiment"] = serde_json::json!("single");
        assert!(parse(v).is_err());
        v["theta_grid"] = serde_json::json!([0.3]);
        v["n_qubits"] = serde_json::json!([2]);
        assert!(parse(v).is_ok());
    }
}
