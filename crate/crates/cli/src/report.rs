//! JSON serialization of solver reports.

use serde_json::{json, Value};
use shadowopt::minimax::MinimaxReport;

/// Serializes a report with field names matching the struct. The
/// worst-case state is emitted as a flattened row-major list of
/// `[re, im]` pairs; `zero_time` blanks the wall-clock field so reruns are
/// byte-identical.
pub fn report_to_json(report: &MinimaxReport, zero_time: bool) -> Value {
    let rho = report.rho_star.entries();
    let mut rho_flat: Vec<Value> = Vec::with_capacity(rho.nrows() * rho.ncols());
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            let z = rho[(i, j)];
            rho_flat.push(json!([z.re, z.im]));
        }
    }
    let x: Vec<f64> = report.x_star.values().iter().copied().collect();
    json!({
        "optimal_value": report.optimal_value,
        "x_star": x,
        "rho_star": rho_flat,
        "rho_rank": report.rho_rank,
        "duality_gap": report.duality_gap,
        "canonical_worst_case": report.canonical_worst_case,
        "appendix_e_bound": report.appendix_e_bound,
        "iterations_per_restart": report.iterations_per_restart,
        "objective_trace": report.objective_trace,
        "wall_time": if zero_time { 0.0 } else { report.wall_time },
        "converged": report.converged,
        "final_grad_norm": report.final_grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use shadowopt::minimax::{maximize_over_states, MinimaxOptions};
    use shadowopt::operator::HermitianOperator;
    use shadowopt::povm::build_xz_povm;

    #[test]
    fn report_json_has_expected_fields_and_flattened_state() {
        let povm = build_xz_povm();
        let obs = HermitianOperator::pauli_z();
        let opts = MinimaxOptions {
            restarts: 2,
            seed: 3,
            ..MinimaxOptions::default()
        };
        let report = maximize_over_states(&povm, &obs, &opts).unwrap();
        let v = report_to_json(&report, true);
        for key in [
            "optimal_value",
            "x_star",
            "rho_star",
            "rho_rank",
            "duality_gap",
            "canonical_worst_case",
            "appendix_e_bound",
            "iterations_per_restart",
            "objective_trace",
            "wall_time",
            "converged",
            "final_grad_norm",
        ] {
            assert!(v.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(v["rho_star"].as_array().unwrap().len(), 4);
        assert_eq!(v["rho_star"][0].as_array().unwrap().len(), 2);
        assert_eq!(v["wall_time"].as_f64().unwrap(), 0.0);
        assert!((v["optimal_value"].as_f64().unwrap() - 2.0).abs() < 1e-4);
    }
}
