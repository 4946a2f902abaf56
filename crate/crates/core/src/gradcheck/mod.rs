//! Finite-difference and adjoint/tangent consistency checks.

pub mod instances;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::derivatives::{adjoint, tangent, Adjoints, Tangents};
use crate::equations::{EquationKind, EquationSpec};
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Matrix};
use crate::rng::NormalRng;

pub use instances::{random_pbar, random_spec, random_tangents};

/// Base relative step for central differences.
pub const FD_REL_STEP: f64 = 1e-5;

/// Outcome of a batch of derivative checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub max_rel_err: f64,
    pub per_input: BTreeMap<String, f64>,
    pub passed: bool,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn new(tolerance: f64) -> Self {
        CheckReport {
            max_rel_err: 0.0,
            per_input: BTreeMap::new(),
            passed: true,
            tolerance,
        }
    }

    pub fn record(&mut self, name: &str, err: f64) {
        let slot = self.per_input.entry(name.to_string()).or_insert(0.0);
        // NaN must fail the check.
        if err > *slot || err.is_nan() {
            *slot = err;
        }
        if err > self.max_rel_err || err.is_nan() {
            self.max_rel_err = err;
        }
        self.passed = self.max_rel_err <= self.tolerance;
    }

    pub fn merge(&mut self, other: &CheckReport) {
        for (k, v) in &other.per_input {
            self.record(k, *v);
        }
    }
}

/// `‖a − b‖_F / max(‖a‖_F, ‖b‖_F)`, zero when both vanish.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let denom = a.frobenius_norm().max(b.frobenius_norm());
    if denom == 0.0 {
        0.0
    } else {
        (a - b).frobenius_norm() / denom
    }
}

/// Input names in the order `A, B, Q|C, R`, restricted to those present.
pub fn input_names(kind: EquationKind) -> &'static [&'static str] {
    match kind {
        EquationKind::Csylv | EquationKind::Dsylv => &["A", "B", "C"],
        EquationKind::Clyap | EquationKind::Dlyap => &["A", "Q"],
        EquationKind::Care | EquationKind::Dare => &["A", "B", "Q", "R"],
    }
}

fn input<'a>(spec: &'a EquationSpec, name: &str) -> &'a Matrix {
    match name {
        "A" => spec.a(),
        "B" => spec.b().expect("B present"),
        "C" | "Q" => spec.q(),
        "R" => spec.r().expect("R present"),
        _ => unreachable!("unknown input {name}"),
    }
}

fn single_seed(name: &str, m: Matrix) -> Tangents {
    match name {
        "A" => Tangents::only_a(m),
        "B" => Tangents::only_b(m),
        "C" | "Q" => Tangents::only_q(m),
        "R" => Tangents::only_r(m),
        _ => unreachable!("unknown input {name}"),
    }
}

fn seed_of<'a>(seeds: &'a Tangents, name: &str) -> Option<&'a Matrix> {
    match name {
        "A" => seeds.a.as_ref(),
        "B" => seeds.b.as_ref(),
        "C" | "Q" => seeds.q.as_ref(),
        "R" => seeds.r.as_ref(),
        _ => None,
    }
}

fn adjoint_of<'a>(adj: &'a Adjoints, name: &str) -> Option<&'a Matrix> {
    match name {
        "A" => Some(&adj.a),
        "B" => adj.b.as_ref(),
        "C" | "Q" => Some(&adj.q),
        "R" => adj.r.as_ref(),
        _ => None,
    }
}

/// The spec moved by `t · direction`. For the Riccati kinds the perturbed
/// `Q` and `R` are re-symmetrized.
pub fn perturb(spec: &EquationSpec, direction: &Tangents, t: f64) -> EquationSpec {
    let shift = |x: &Matrix, d: Option<&Matrix>| match d {
        Some(d) => x + &d.scale(t),
        None => x.clone(),
    };
    let riccati = spec.kind().is_riccati();
    let sym = |m: Matrix| if riccati { symmetrize(&m).unwrap() } else { m };
    spec.with_inputs(
        shift(spec.a(), direction.a.as_ref()),
        spec.b().map(|b| shift(b, direction.b.as_ref())),
        sym(shift(spec.q(), direction.q.as_ref())),
        spec.r().map(|r| sym(shift(r, direction.r.as_ref()))),
    )
}

/// Default central-difference step: the largest input perturbation is
/// `1e-5 · max(1, ‖X‖_F)` for the input `X` it lands on.
pub fn default_step(spec: &EquationSpec, direction: &Tangents) -> f64 {
    let mut h = f64::INFINITY;
    for name in input_names(spec.kind()) {
        if let Some(d) = seed_of(direction, name) {
            let dn = d.frobenius_norm();
            if dn > 0.0 {
                h = h.min(FD_REL_STEP * input(spec, name).frobenius_norm().max(1.0) / dn);
            }
        }
    }
    if h.is_finite() {
        h
    } else {
        FD_REL_STEP
    }
}

/// Central difference `(P(θ + h d) − P(θ − h d)) / 2h`.
pub fn fd_directional(spec: &EquationSpec, direction: &Tangents, h: f64) -> Result<Matrix> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Invalid(format!("step must be positive, got {h}")));
    }
    let solve = |t: f64| {
        perturb(spec, direction, t)
            .solve()
            .map(|r| r.p)
            .map_err(|e| Error::Perturbation(e.to_string()))
    };
    let plus = solve(h)?;
    let minus = solve(-h)?;
    Ok((&plus - &minus).scale(0.5 / h))
}

/// Finite-difference gradient of `ℓ(P) = ⟨W, P⟩` w.r.t. one input.
///
/// Symmetric inputs of the Riccati kinds are perturbed along `(E_ij + E_ji)/2`
/// so that the result is comparable with a symmetric adjoint.
pub fn fd_gradient(spec: &EquationSpec, name: &str, w: &Matrix) -> Result<Matrix> {
    let x = input(spec, name);
    let sym = spec.kind().is_riccati() && matches!(name, "Q" | "R");
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if sym && j < i {
                continue;
            }
            let mut e = Matrix::zeros(x.rows(), x.cols());
            if sym && i != j {
                e[(i, j)] = 0.5;
                e[(j, i)] = 0.5;
            } else {
                e[(i, j)] = 1.0;
            }
            let dir = single_seed(name, e);
            let h = default_step(spec, &dir);
            let dp = fd_directional(spec, &dir, h)?;
            let g = w.dot(&dp);
            grad[(i, j)] = g;
            if sym {
                grad[(j, i)] = g;
            }
        }
    }
    Ok(grad)
}

/// Adjoint/tangent consistency `⟨P̄, Ṗ⟩ = Σ_X ⟨X̄, Ẋ⟩` over `trials` random
/// seed pairs, per input and for all inputs jointly.
///
/// The discrepancy is normalized by `max(|⟨P̄, Ṗ⟩|, Σ_X |⟨X̄, Ẋ⟩|)`. Trial `t`
/// draws from the stream `(seed, t)`.
pub fn dot_test(spec: &EquationSpec, trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut report = CheckReport::new(tol);
    let primal = spec.solve()?;
    for trial in 0..trials {
        let mut rng = NormalRng::with_stream(seed, trial as u64);
        let seeds = random_tangents(spec, &mut rng);
        let pbar = random_pbar(spec, &mut rng);
        let adj = adjoint(spec, &primal, &pbar)?;

        let mut total_lhs = 0.0;
        let mut total_abs = 0.0;
        for name in input_names(spec.kind()) {
            let single = single_seed(name, seed_of(&seeds, name).unwrap().clone());
            let pdot = tangent(spec, &primal, &single)?;
            let lhs = pbar.dot(&pdot);
            let rhs = single.dot(&adj);
            report.record(name, relative_gap(lhs, rhs, rhs.abs()));
            total_lhs += lhs;
            total_abs += rhs.abs();
        }
        let pdot = tangent(spec, &primal, &seeds)?;
        let lhs = pbar.dot(&pdot);
        let rhs = seeds.dot(&adj);
        report.record("all", relative_gap(lhs, rhs, total_abs));
        // Tangent linearity across inputs.
        report.record("linearity", relative_gap(lhs, total_lhs, total_abs));
    }
    Ok(report)
}

fn relative_gap(lhs: f64, rhs: f64, magnitude: f64) -> f64 {
    let denom = lhs.abs().max(magnitude);
    if denom == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / denom
    }
}

/// Forward rule vs central differences along `trials` random directions.
pub fn tangent_fd_check(
    spec: &EquationSpec,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new(tol);
    let primal = spec.solve()?;
    for trial in 0..trials {
        let mut rng = NormalRng::with_stream(seed, trial as u64);
        let dir = random_tangents(spec, &mut rng);
        let pdot = tangent(spec, &primal, &dir)?;
        let fd = fd_directional(spec, &dir, default_step(spec, &dir))?;
        report.record("tangent", rel_err(&pdot, &fd));
    }
    Ok(report)
}

/// Each reverse-mode input adjoint vs the finite-difference gradient of
/// `ℓ(P) = ⟨W, P⟩`, `W` random (symmetric for the Riccati kinds).
pub fn adjoint_fd_check(
    spec: &EquationSpec,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new(tol);
    let primal = spec.solve()?;
    for trial in 0..trials {
        let mut rng = NormalRng::with_stream(seed, trial as u64);
        let w = random_pbar(spec, &mut rng);
        let adj = adjoint(spec, &primal, &w)?;
        for name in input_names(spec.kind()) {
            let fd = fd_gradient(spec, name, &w)?;
            let analytic = adjoint_of(&adj, name).expect("adjoint present");
            report.record(name, rel_err(analytic, &fd));
        }
    }
    Ok(report)
}

/// Dot test plus forward and reverse finite-difference checks on one
/// random instance per trial, all held to `tol`.
pub fn full_check(
    kind: EquationKind,
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    if n == 0 || (kind.is_riccati() && m == 0) {
        return Err(Error::Invalid("dimensions must be positive".into()));
    }
    let mut report = CheckReport::new(tol);
    for trial in 0..trials {
        let mut rng = NormalRng::with_stream(seed ^ 0x9e37_79b9_7f4a_7c15, trial as u64);
        let spec = random_spec(kind, n, m, &mut rng);
        let trial_seed = seed.wrapping_add(trial as u64);
        for (prefix, sub) in [
            ("dot", dot_test(&spec, 1, trial_seed, tol)?),
            ("fd", tangent_fd_check(&spec, 1, trial_seed, tol)?),
            ("adjoint_fd", adjoint_fd_check(&spec, 1, trial_seed, tol)?),
        ] {
            for (k, v) in &sub.per_input {
                report.record(&format!("{prefix}.{k}"), *v);
            }
        }
    }
    Ok(report)
}
