use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use mateq::gradcheck::full_check;
use mateq::inverse_lqr::{example_system, fit, generate_dataset, LqrSpec};
use mateq::lbfgs::LbfgsOptions;
use mateq::{EquationKind, EquationSpec, Error};

/// Recovery tolerances for `inverse-lqr`.
const RECOVERY_Q_TOL: f64 = 5e-2;
const RECOVERY_LOSS_TOL: f64 = 1e-8;

const EXIT_INPUT: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_UNMET: u8 = 3;

#[derive(Parser)]
#[command(name = "mateq", version, about = "Differentiable matrix-equation solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one equation given as JSON and print the report.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify tangent and adjoint rules on random instances.
    Gradcheck {
        #[arg(long)]
        kind: EquationKind,
        #[arg(long)]
        n: usize,
        /// Input dimension for care/dare (defaults to n).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Recover the LQR state cost from simulated optimal trajectories.
    #[command(name = "inverse-lqr")]
    InverseLqr {
        /// LQR system JSON with "A", "B", "Q", "R" (defaults to the built-in example).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Number of trajectories.
        #[arg(long = "K", default_value_t = 30)]
        count: usize,
        /// Horizon (states per trajectory).
        #[arg(long = "T", default_value_t = 30)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long)]
        out_trace: Option<PathBuf>,
        #[arg(long)]
        out_q: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Shape { .. } | Error::NotSymmetric { .. } | Error::NotPositiveDefinite { .. } | Error::Invalid(_) => {
                EXIT_INPUT
            }
            _ => EXIT_SOLVER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("invalid JSON in {}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("report serialization cannot fail")
}

fn run_solve(spec: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let spec: EquationSpec = read_json(spec)?;
    let report = spec.solve()?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_out(out, &to_json(&report))
}

fn run_gradcheck(kind: EquationKind, n: usize, m: Option<usize>, trials: usize, seed: u64, tol: f64) -> Result<(), Failure> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Failure::input("--tol must be a non-negative number"));
    }
    let report = full_check(kind, n, m.unwrap_or(n), trials, seed, tol)?;
    println!("{}", to_json(&report));
    if report.passed {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_UNMET,
            message: format!("gradient check failed: max relative error {:e} > {tol:e}", report.max_rel_err),
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn run_inverse_lqr(
    spec: Option<&Path>,
    count: usize,
    horizon: usize,
    seed: u64,
    max_iters: usize,
    out_trace: Option<&Path>,
    out_q: Option<&Path>,
) -> Result<(), Failure> {
    let spec: LqrSpec = match spec {
        Some(p) => read_json(p)?,
        None => example_system(),
    };
    spec.validate()?;
    let data = generate_dataset(&spec, count, horizon, seed)?;
    let opts = LbfgsOptions {
        max_iters,
        ..LbfgsOptions::default()
    };
    let res = fit(&spec, &data, &opts)?;
    let error = (&res.q_hat - &spec.q).frobenius_norm();
    let recovered = error <= RECOVERY_Q_TOL && res.loss <= RECOVERY_LOSS_TOL;

    if let Some(p) = out_trace {
        fs::write(p, res.trace.to_csv()).map_err(|e| Failure::input(format!("cannot write {}: {e}", p.display())))?;
    }
    if let Some(p) = out_q {
        fs::write(p, to_json(&res.q_hat) + "\n")
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", p.display())))?;
    }
    let summary = json!({
        "Q_hat": res.q_hat,
        "recovery_error": error,
        "loss": res.loss,
        "iterations": res.iterations,
        "status": res.status,
        "recovered": recovered,
    });
    println!("{}", to_json(&summary));
    if recovered {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_UNMET,
            message: format!("Q not recovered: error {error:e}, loss {:e}", res.loss),
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            eprintln!("{}", rendered.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let result = match cli.command {
        Command::Solve { spec, out } => run_solve(&spec, out.as_deref()),
        Command::Gradcheck {
            kind,
            n,
            m,
            trials,
            seed,
            tol,
        } => run_gradcheck(kind, n, m, trials, seed, tol),
        Command::InverseLqr {
            spec,
            count,
            horizon,
            seed,
            max_iters,
            out_trace,
            out_q,
        } => run_inverse_lqr(
            spec.as_deref(),
            count,
            horizon,
            seed,
            max_iters,
            out_trace.as_deref(),
            out_q.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
