//! Parallel (theta, N) sweeps with CSV/SVG/report emission.

use std::path::Path;

use rayon::prelude::*;
use shadowopt::basis::observable_coeffs;
use shadowopt::error::Error;
use shadowopt::frame::{canonical_coefficients, regularize_povm, shadow_norm_bound};
use shadowopt::minimax::{maximize_over_states, MinimaxOptions, MinimaxReport};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::experiments::{
    pauli_sum_observable_with_limit, product_observable_with_limit, DEFAULT_MAX_QUBITS,
    HARD_MAX_QUBITS,
};
use crate::report::report_to_json;

/// One sweep grid point.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub experiment: &'static str,
    pub theta: f64,
    pub n_qubits: usize,
    pub optimal_value: f64,
    pub canonical_value: f64,
    pub appendix_e_bound: f64,
    pub shadow_norm_canonical: f64,
    pub rho_rank: usize,
    pub duality_gap: f64,
    pub converged: bool,
    pub wall_time_s: f64,
}

/// Records plus the reports they came from, in grid order.
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub reports: Vec<MinimaxReport>,
    pub all_converged: bool,
}

/// CSV header, fixed schema.
pub const CSV_HEADER: &str = "experiment,theta,n_qubits,optimal_value,canonical_value,appendix_e_bound,shadow_norm_canonical,rho_rank,duality_gap,converged,wall_time_s";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Solves every grid point in parallel. Points are indexed in their sorted
/// (n_qubits, theta) order and each derives its own seed from
/// (config seed, index), so results do not depend on scheduling.
pub fn run_sweep(config: &ExperimentConfig, allow_large: bool) -> Result<SweepOutcome, CliError> {
    let max_qubits = if allow_large {
        HARD_MAX_QUBITS
    } else {
        DEFAULT_MAX_QUBITS
    };
    let mut grid: Vec<(usize, f64)> = Vec::new();
    let mut ns = config.n_qubits.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut thetas = config.theta_grid.clone();
    thetas.sort_by(|a, b| a.partial_cmp(b).expect("finite theta"));
    for &n in &ns {
        for &t in &thetas {
            grid.push((n, t));
        }
    }

    let label = config.experiment.label();
    let results: Vec<Result<(SweepRecord, MinimaxReport), CliError>> = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &(n, theta))| {
            let t0 = std::time::Instant::now();
            let (povm, obs) = match config.experiment {
                ExperimentKind::PauliSum => {
                    pauli_sum_observable_with_limit(theta, n, max_qubits)?
                }
                ExperimentKind::ProductObservable | ExperimentKind::Single => {
                    product_observable_with_limit(theta, n, max_qubits)?
                }
            };
            let opts = MinimaxOptions {
                seed: splitmix64(config.seed ^ (idx as u64 + 1)),
                ..config.minimax.clone()
            };
            let (report, converged) = match maximize_over_states(&povm, &obs, &opts) {
                Ok(r) => (r, true),
                Err(Error::NotConverged {
                    report: Some(r), ..
                }) => (*r, false),
                Err(e) => return Err(CliError::from(e)),
            };
            let reg = regularize_povm(&povm, opts.eps_regularization)?;
            let o = observable_coeffs(&obs, reg.basis())?;
            let x_mp = canonical_coefficients(&reg, &o)?;
            let shadow_mp = shadow_norm_bound(&x_mp, &reg)?;
            let record = SweepRecord {
                experiment: label,
                theta,
                n_qubits: n,
                optimal_value: report.optimal_value,
                canonical_value: report.canonical_worst_case,
                appendix_e_bound: report.appendix_e_bound,
                shadow_norm_canonical: shadow_mp,
                rho_rank: report.rho_rank,
                duality_gap: report.duality_gap,
                converged,
                wall_time_s: t0.elapsed().as_secs_f64(),
            };
            Ok((record, report))
        })
        .collect();

    let mut records = Vec::with_capacity(grid.len());
    let mut reports = Vec::with_capacity(grid.len());
    for r in results {
        let (record, report) = r?;
        records.push(record);
        reports.push(report);
    }
    let all_converged = records.iter().all(|r| r.converged);
    Ok(SweepOutcome {
        records,
        reports,
        all_converged,
    })
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// Renders the fixed-schema CSV ('.' decimal point, shortest-roundtrip
/// floats). `zero_time` blanks the wall-time column for byte-identical
/// reruns.
pub fn records_to_csv(records: &[SweepRecord], zero_time: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let wall = if zero_time { 0.0 } else { r.wall_time_s };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.theta,
            r.n_qubits,
            r.optimal_value,
            r.canonical_value,
            r.appendix_e_bound,
            r.shadow_norm_canonical,
            r.rho_rank,
            r.duality_gap,
            fmt_bool(r.converged),
            wall
        ));
    }
    out
}

/// Least-squares slope of y against x.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Per-theta scaling fits over the qubit series: the exponential rate is
/// the slope of ln(value) against N, the power-law exponent the slope of
/// ln(value) against ln(N). Written next to the main CSV so scaling claims
/// are machine-checkable.
pub fn fits_to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("experiment,theta,series,n_points,exp_rate,power_exponent\n");
    let mut thetas: Vec<f64> = records.iter().map(|r| r.theta).collect();
    thetas.sort_by(|a, b| a.partial_cmp(b).expect("finite theta"));
    thetas.dedup();
    for &theta in &thetas {
        let series: Vec<&SweepRecord> = records
            .iter()
            .filter(|r| r.theta == theta)
            .collect();
        if series.len() < 2 {
            continue;
        }
        for (name, pick) in [
            ("optimal", true),
            ("canonical", false),
        ] {
            let mut ns = Vec::new();
            let mut lnv = Vec::new();
            let mut lnn = Vec::new();
            for r in &series {
                let v = if pick { r.optimal_value } else { r.canonical_value };
                if v > 0.0 {
                    ns.push(r.n_qubits as f64);
                    lnv.push(v.ln());
                    lnn.push((r.n_qubits as f64).ln());
                }
            }
            if ns.len() < 2 {
                continue;
            }
            let exp_rate = slope(&ns, &lnv);
            let power = slope(&lnn, &lnv);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                series[0].experiment,
                theta,
                name,
                ns.len(),
                exp_rate,
                power
            ));
        }
    }
    out
}

/// Writes all sweep artifacts: the CSV, the fits CSV, per-point JSON
/// reports, and the optional SVG chart.
pub fn write_outputs(
    config: &ExperimentConfig,
    outcome: &SweepOutcome,
    zero_time: bool,
) -> Result<(), CliError> {
    let io_err = |path: &Path, e: std::io::Error| {
        CliError::Io(format!("cannot write {}: {e}", path.display()))
    };
    let csv = records_to_csv(&outcome.records, zero_time);
    std::fs::write(&config.csv_path, csv).map_err(|e| io_err(&config.csv_path, e))?;

    let fits_path = fits_path_for(&config.csv_path);
    std::fs::write(&fits_path, fits_to_csv(&outcome.records))
        .map_err(|e| io_err(&fits_path, e))?;

    for (idx, (record, report)) in outcome
        .records
        .iter()
        .zip(outcome.reports.iter())
        .enumerate()
    {
        let name = format!(
            "point_{idx:03}_{}_n{}_theta{:.6}.json",
            record.experiment, record.n_qubits, record.theta
        );
        let path = config.report_dir.join(name);
        let json = report_to_json(report, zero_time);
        let text = serde_json::to_string_pretty(&json)
            .map_err(|e| CliError::Io(format!("report serialization failed: {e}")))?;
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }

    if let Some(svg_path) = &config.svg_path {
        let svg = crate::svg::render_scaling_chart(&outcome.records);
        std::fs::write(svg_path, svg).map_err(|e| io_err(svg_path, e))?;
    }
    Ok(())
}

/// `out.csv -> out.fits.csv`.
pub fn fits_path_for(csv_path: &Path) -> std::path::PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());
    csv_path.with_file_name(format!("{stem}.fits.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(theta: f64, n: usize, opt: f64, can: f64) -> SweepRecord {
        SweepRecord {
            experiment: "product_observable",
            theta,
            n_qubits: n,
            optimal_value: opt,
            canonical_value: can,
            appendix_e_bound: 0.25,
            shadow_norm_canonical: can + 0.5,
            rho_rank: n + 1,
            duality_gap: 1e-9,
            converged: true,
            wall_time_s: 1.25,
        }
    }

    #[test]
    fn csv_layout_matches_schema() {
        let rows = vec![record(0.0, 1, 0.5, 0.5)];
        let csv = records_to_csv(&rows, true);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(
            row,
            "product_observable,0,1,0.5,0.5,0.25,1,2,0.000000001,true,0"
        );
    }

    #[test]
    fn zeroed_time_is_stable_across_calls() {
        let rows = vec![record(0.3, 2, 0.6, 0.7)];
        assert_eq!(records_to_csv(&rows, true), records_to_csv(&rows, true));
    }

    #[test]
    fn exponential_fit_recovers_planted_rate() {
        let rate = 0.35_f64;
        let rows: Vec<SweepRecord> = (1..=5)
            .map(|n| {
                record(
                    0.0,
                    n,
                    0.5 * (0.05 * n as f64).exp(),
                    0.5 * (rate * n as f64).exp(),
                )
            })
            .collect();
        let fits = fits_to_csv(&rows);
        let canonical_line = fits
            .lines()
            .find(|l| l.contains(",canonical,"))
            .expect("canonical fit present");
        let rate_field: f64 = canonical_line.split(',').nth(4).unwrap().parse().unwrap();
        assert!((rate_field - rate).abs() < 1e-9);
    }

    #[test]
    fn fits_path_replaces_extension() {
        assert_eq!(
            fits_path_for(Path::new("/tmp/x/out.csv")),
            Path::new("/tmp/x/out.fits.csv")
        );
    }
}
