use std::path::PathBuf;

use clap::{Parser, Subcommand};
use shadowopt::error::Error;
use shadowopt::frame::regularize_povm;
use shadowopt::minimax::{maximize_over_states, MinimaxOptions, MinimaxReport};
use shadowopt::sim::{coverage_test, hoeffding_sample_size, SampleSizeQuery};
use shadowopt::state::DensityMatrix;

use shadowopt_cli::check::run_check;
use shadowopt_cli::config::{ExperimentConfig, ExperimentKind};
use shadowopt_cli::error::CliError;
use shadowopt_cli::experiments::{DEFAULT_MAX_QUBITS, HARD_MAX_QUBITS};
use shadowopt_cli::inputs::{load_observable, load_povm, parse_builtin_povm, parse_observable};
use shadowopt_cli::report::report_to_json;
use shadowopt_cli::sweep::{run_sweep, write_outputs};

/// Variance-optimal classical post-processing for POVM shadow estimation.
#[derive(Parser)]
#[command(name = "shadowopt", version, about)]
struct Cli {
    /// JSON experiment configuration (required by the sweep subcommands).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override (defaults to the config seed, or 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread count (defaults to the rayon heuristic).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Base directory for relative output paths.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Depolarizing regularization override.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Zero wall-time fields so identical runs emit identical bytes.
    #[arg(long, global = true)]
    deterministic_output: bool,

    /// Permit 6- and 7-qubit problems (lazy dense algebra; slow).
    #[arg(long, global = true)]
    allow_large: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one POVM/observable instance and print the report as JSON.
    Optimize {
        /// Built-in POVM: `xz` or `xz^N`.
        #[arg(long, default_value = "xz")]
        builtin: String,
        /// Observable: Z | X | I | product:<theta> | paulisum:<theta>.
        #[arg(long, default_value = "Z")]
        observable: String,
        /// JSON observable file (overrides --observable).
        #[arg(long)]
        observable_file: Option<PathBuf>,
        /// JSON POVM file (overrides --builtin).
        #[arg(long)]
        povm_file: Option<PathBuf>,
    },
    /// Run the product-observable sweep from the config file.
    SweepProduct,
    /// Run the Pauli-sum sweep from the config file.
    SweepPauliSum,
    /// Hoeffding-sized coverage test of the optimized estimator.
    Sample {
        #[arg(long, default_value = "xz")]
        builtin: String,
        #[arg(long, default_value = "Z")]
        observable: String,
        /// Target accuracy.
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Failure tolerance.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Independent repetitions of the sized run.
        #[arg(long, default_value_t = 500)]
        trials: usize,
    },
    /// Run the convexity/concavity/oracle property suites.
    Check,
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot set thread count: {e}")))?;
    }
    match &cli.command {
        Command::Optimize {
            builtin,
            observable,
            observable_file,
            povm_file,
        } => cmd_optimize(&cli, builtin, observable, observable_file, povm_file),
        Command::SweepProduct => cmd_sweep(&cli, false),
        Command::SweepPauliSum => cmd_sweep(&cli, true),
        Command::Sample {
            builtin,
            observable,
            epsilon,
            delta,
            trials,
        } => cmd_sample(&cli, builtin, observable, *epsilon, *delta, *trials),
        Command::Check => {
            let ok = run_check(cli.seed.unwrap_or(0))?;
            Ok(if ok { 0 } else { 2 })
        }
    }
}

fn solver_options(cli: &Cli) -> MinimaxOptions {
    let mut opts = MinimaxOptions {
        seed: cli.seed.unwrap_or(0),
        ..MinimaxOptions::default()
    };
    if let Some(eps) = cli.eps {
        opts.eps_regularization = eps;
    }
    opts
}

fn solve_flagged(
    povm: &shadowopt::povm::Povm,
    obs: &shadowopt::operator::HermitianOperator,
    opts: &MinimaxOptions,
) -> Result<(MinimaxReport, bool), CliError> {
    match maximize_over_states(povm, obs, opts) {
        Ok(report) => Ok((report, true)),
        Err(Error::NotConverged {
            report: Some(report),
            ..
        }) => Ok((*report, false)),
        Err(e) => Err(CliError::from(e)),
    }
}

fn cmd_optimize(
    cli: &Cli,
    builtin: &str,
    observable: &str,
    observable_file: &Option<PathBuf>,
    povm_file: &Option<PathBuf>,
) -> Result<i32, CliError> {
    let max_qubits = if cli.allow_large {
        HARD_MAX_QUBITS
    } else {
        DEFAULT_MAX_QUBITS
    };
    let (povm, n_qubits) = match povm_file {
        Some(path) => {
            let p = load_povm(path)?;
            (p, 1)
        }
        None => parse_builtin_povm(builtin, max_qubits)?,
    };
    let obs = match observable_file {
        Some(path) => load_observable(path)?,
        None => parse_observable(observable, n_qubits)?,
    };
    if obs.dim() != povm.dim() {
        return Err(CliError::Validation(format!(
            "observable dimension {} does not match the POVM dimension {}",
            obs.dim(),
            povm.dim()
        )));
    }
    let opts = solver_options(cli);
    let (report, converged) = solve_flagged(&povm, &obs, &opts)?;
    let json = report_to_json(&report, cli.deterministic_output);
    println!(
        "{}",
        serde_json::to_string_pretty(&json)
            .map_err(|e| CliError::Io(format!("report serialization failed: {e}")))?
    );
    Ok(if converged { 0 } else { 2 })
}

fn cmd_sweep(cli: &Cli, pauli: bool) -> Result<i32, CliError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("--config is required for sweeps".into()))?;
    let mut config = ExperimentConfig::load(config_path)?;
    match (pauli, config.experiment) {
        (false, ExperimentKind::ProductObservable | ExperimentKind::Single) => {}
        (true, ExperimentKind::PauliSum) => {}
        (false, ExperimentKind::PauliSum) => {
            return Err(CliError::Validation(
                "config declares pauli_sum; use sweep-pauli-sum".into(),
            ))
        }
        (true, _) => {
            return Err(CliError::Validation(
                "config does not declare a pauli_sum experiment".into(),
            ))
        }
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.minimax.seed = seed;
    }
    if let Some(eps) = cli.eps {
        config.minimax.eps_regularization = eps;
    }
    if let Some(out) = &cli.out {
        config.rebase_outputs(out);
    }
    config.prepare_outputs()?;
    let outcome = run_sweep(&config, cli.allow_large)?;
    write_outputs(&config, &outcome, cli.deterministic_output)?;
    eprintln!(
        "{} points, {} converged, csv: {}",
        outcome.records.len(),
        outcome.records.iter().filter(|r| r.converged).count(),
        config.csv_path.display()
    );
    Ok(if outcome.all_converged { 0 } else { 2 })
}

fn cmd_sample(
    cli: &Cli,
    builtin: &str,
    observable: &str,
    epsilon: f64,
    delta: f64,
    trials: usize,
) -> Result<i32, CliError> {
    let max_qubits = if cli.allow_large {
        HARD_MAX_QUBITS
    } else {
        DEFAULT_MAX_QUBITS
    };
    let (povm, n_qubits) = parse_builtin_povm(builtin, max_qubits)?;
    let obs = parse_observable(observable, n_qubits)?;
    let opts = solver_options(cli);
    let (report, converged) = solve_flagged(&povm, &obs, &opts)?;

    // Sample against the regularized POVM the optimized coefficients are
    // feasible for; the worst-case bound sizes the Hoeffding run.
    let reg = regularize_povm(&povm, opts.eps_regularization)?;
    let sigma_sq = report.optimal_value + report.duality_gap.max(0.0);
    let query = SampleSizeQuery {
        sigma_sq,
        epsilon,
        delta,
        m_observables: 1,
    };
    let shots = hoeffding_sample_size(&query)?;
    let rho = DensityMatrix::maximally_mixed(povm.dim());
    let coverage = coverage_test(
        &rho,
        &reg,
        &report.x_star,
        epsilon,
        trials,
        shots,
        opts.seed,
    )?;
    let ok = coverage >= 1.0 - delta;
    let json = serde_json::json!({
        "sigma_sq": sigma_sq,
        "epsilon": epsilon,
        "delta": delta,
        "trials": trials,
        "shots": shots,
        "coverage": coverage,
        "solver_converged": converged,
        "target_coverage": 1.0 - delta,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&json)
            .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?
    );
    Ok(if ok && converged { 0 } else { 2 })
}
