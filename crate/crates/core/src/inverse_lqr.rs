//! Recovering an LQR state cost from observed closed-loop trajectories.
//!
//! The system `x_{t+1} = A x_t + B u_t` runs under the optimal discrete-time
//! feedback `u_t = −K x_t`, `K = (R + BᵀPB)⁻¹BᵀPA` with `P` the DARE solution
//! for the unknown `Q`. Given trajectories, [`fit`] searches `Q̂ = M Mᵀ` that
//! reproduces them, differentiating through the DARE on an [`ad::Tape`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ad::{NodeId, Tape};
use crate::equations::{dare_gain, solve_dare, EquationKind};
use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions, LbfgsStatus};
use crate::linalg::{cholesky, Matrix, Vector};
use crate::rng::NormalRng;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrSpec {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "Q")]
    pub q: Matrix,
    #[serde(rename = "R")]
    pub r: Matrix,
}

impl LqrSpec {
    pub fn new(a: Matrix, b: Matrix, q: Matrix, r: Matrix) -> Result<Self> {
        let spec = LqrSpec { a, b, q, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.rows();
        let shape_err = |op, left, right| Err(Error::Shape { op, left, right });
        if !self.a.is_square() {
            return shape_err("A must be square", self.a.shape(), self.a.shape());
        }
        if self.b.rows() != n {
            return shape_err("B rows must match A", self.a.shape(), self.b.shape());
        }
        if self.q.shape() != (n, n) {
            return shape_err("Q must match A", self.a.shape(), self.q.shape());
        }
        let m = self.b.cols();
        if self.r.shape() != (m, m) {
            return shape_err("R must be m x m", self.b.shape(), self.r.shape());
        }
        for (name, x) in [("Q", &self.q), ("R", &self.r)] {
            if !x.is_symmetric(SYMMETRY_TOL) {
                return Err(Error::NotSymmetric {
                    name,
                    asymmetry: x.asymmetry(),
                });
            }
        }
        cholesky(&self.r)?;
        let eps = PSD_TOL * self.q.frobenius_norm().max(1.0);
        cholesky(&(&self.q + &Matrix::identity(n).scale(eps)))?;
        Ok(())
    }

    fn with_q(&self, q: Matrix) -> LqrSpec {
        LqrSpec { q, ..self.clone() }
    }
}

/// The double-integrator-like system used in the examples:
/// `A = [[1, 1], [0, 1]]`, `B = I`, `Q = diag(1, 0)`, `R = diag(0.1, 0.3)`.
pub fn example_system() -> LqrSpec {
    LqrSpec {
        a: Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]),
        b: Matrix::identity(2),
        q: Matrix::from_diag(&[1.0, 0.0]),
        r: Matrix::from_diag(&[0.1, 0.3]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrGain {
    pub k: Matrix,
    pub p: Matrix,
    pub warnings: Vec<String>,
}

pub fn lqr_gain(spec: &LqrSpec) -> Result<LqrGain> {
    spec.validate()?;
    let report = solve_dare(&spec.a, &spec.b, &spec.q, &spec.r)?;
    let k = match &report.gain {
        Some(k) => k.clone(),
        None => dare_gain(&spec.a, &spec.b, &spec.r, &report.p)?,
    };
    Ok(LqrGain {
        k,
        p: report.p,
        warnings: report.warnings,
    })
}

/// `T` states of `x_{t+1} = (A − BK) x_t` starting from `x_init`.
pub fn simulate(a: &Matrix, b: &Matrix, k: &Matrix, x_init: &Vector, horizon: usize) -> Result<Vec<Vector>> {
    let closed = a.checked_sub(&b.matmul(k)?)?;
    if x_init.len() != closed.cols() {
        return Err(Error::Shape {
            op: "simulate initial state",
            left: closed.shape(),
            right: (x_init.len(), 1),
        });
    }
    let mut states = Vec::with_capacity(horizon);
    let mut x = x_init.to_column();
    for t in 0..horizon {
        if t > 0 {
            x = &closed * &x;
        }
        states.push(Vector::from_vec(x.as_slice().to_vec()));
    }
    Ok(states)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub horizon: usize,
    /// `trajectories[k][t]`, with `trajectories[k][0]` the initial state.
    pub trajectories: Vec<Vec<Vector>>,
}

impl TrajectorySet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn initial_states(&self) -> impl Iterator<Item = &Vector> {
        self.trajectories.iter().filter_map(|tr| tr.first())
    }

    /// States at time `t` as the columns of an n×K matrix.
    fn snapshot(&self, t: usize, n: usize) -> Matrix {
        Matrix::from_fn(n, self.len(), |i, k| self.trajectories[k][t][i])
    }

    fn validate(&self, n: usize) -> Result<()> {
        for tr in &self.trajectories {
            if tr.len() != self.horizon {
                return Err(Error::Invalid(format!(
                    "trajectory has {} states, horizon is {}",
                    tr.len(),
                    self.horizon
                )));
            }
            if let Some(x) = tr.iter().find(|x| x.len() != n || !x.is_finite()) {
                return Err(Error::Invalid(format!(
                    "state of length {} (expected {n}) or non-finite",
                    x.len()
                )));
            }
        }
        Ok(())
    }
}

/// `count` trajectories from standard-normal initial states, simulated under
/// the optimal gain for `spec.q`.
pub fn generate_dataset(spec: &LqrSpec, count: usize, horizon: usize, seed: u64) -> Result<TrajectorySet> {
    let gain = lqr_gain(spec)?;
    let mut rng = NormalRng::new(seed);
    let trajectories = (0..count)
        .map(|_| {
            let x0 = rng.vector(spec.n());
            simulate(&spec.a, &spec.b, &gain.k, &x0, horizon)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectorySet {
        horizon,
        trajectories,
    })
}

/// Records the trajectory loss for the cost node `q` and returns its id.
fn record_loss(tape: &mut Tape, q: NodeId, spec: &LqrSpec, data: &TrajectorySet) -> Result<NodeId> {
    let n = spec.n();
    data.validate(n)?;
    let a = tape.leaf(spec.a.clone());
    let b = tape.leaf(spec.b.clone());
    let r = tape.leaf(spec.r.clone());
    let p = tape.solve(EquationKind::Dare, &[a, b, q, r])?;

    let bt = tape.transpose(b)?;
    let btp = tape.mul(bt, p)?;
    let btpb = tape.mul(btp, b)?;
    let lhs = tape.add(r, btpb)?;
    let btpa = tape.mul(btp, a)?;
    let k = tape.lu_solve(lhs, btpa)?;
    let bk = tape.mul(b, k)?;
    let closed = tape.sub(a, bk)?;

    let terms = data.len() * data.horizon;
    if terms == 0 {
        let zero = tape.leaf(Matrix::scalar(0.0));
        return tape.sq_err(zero, zero);
    }
    let mut x = tape.leaf(data.snapshot(0, n));
    let mut total = tape.sq_err(x, x)?;
    for t in 1..data.horizon {
        x = tape.mul(closed, x)?;
        let observed = tape.leaf(data.snapshot(t, n));
        let e = tape.sq_err(x, observed)?;
        total = tape.add(total, e)?;
    }
    tape.scale(total, 1.0 / terms as f64)
}

/// Mean squared distance between `data` and the trajectories resimulated
/// under the optimal gain for `q_hat`.
pub fn loss(q_hat: &Matrix, data: &TrajectorySet, spec: &LqrSpec) -> Result<f64> {
    let mut tape = Tape::new();
    let q = tape.leaf(q_hat.clone());
    let out = record_loss(&mut tape, q, spec, data)?;
    Ok(tape.value(out)[(0, 0)])
}

/// Loss at `Q̂ = M Mᵀ` and its gradient with respect to `M`.
pub fn loss_grad(m: &Matrix, data: &TrajectorySet, spec: &LqrSpec) -> Result<(f64, Matrix)> {
    let mut tape = Tape::new();
    let mn = tape.leaf(m.clone());
    let mt = tape.transpose(mn)?;
    let q = tape.mul(mn, mt)?;
    let out = record_loss(&mut tape, q, spec, data)?;
    let grads = tape.backward(out)?;
    let g = grads.get(mn).cloned().unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols()));
    Ok((tape.value(out)[(0, 0)], g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub loss: f64,
    pub q_norm: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub rows: Vec<TraceRow>,
}

impl OptimizationTrace {
    pub const CSV_HEADER: &'static str = "iter,loss,q_norm,grad_norm,step";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{:e},{:e},{:e},{:e}", r.iter, r.loss, r.q_norm, r.grad_norm, r.step);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub q_hat: Matrix,
    pub m: Matrix,
    pub loss: f64,
    pub iterations: usize,
    pub status: LbfgsStatus,
    pub trace: OptimizationTrace,
}

/// Minimizes [`loss`] over `Q̂ = M Mᵀ` with L-BFGS starting from `M = I`.
/// Only `A`, `B` and `R` of `spec` are used.
pub fn fit(spec: &LqrSpec, data: &TrajectorySet, opts: &LbfgsOptions) -> Result<FitResult> {
    spec.validate()?;
    let mut trace = OptimizationTrace::default();
    let base = spec.with_q(Matrix::zeros(spec.n(), spec.n()));
    let res = lbfgs::minimize(
        |m| loss_grad(m, data, &base),
        Matrix::identity(spec.n()),
        opts,
        |info| {
            trace.rows.push(TraceRow {
                iter: info.iter,
                loss: info.loss,
                q_norm: (info.x * &info.x.transpose()).frobenius_norm(),
                grad_norm: info.grad_norm,
                step: info.step,
            })
        },
    )?;
    Ok(FitResult {
        q_hat: &res.x * &res.x.transpose(),
        m: res.x,
        loss: res.loss,
        iterations: res.iterations,
        status: res.status,
        trace,
    })
}
