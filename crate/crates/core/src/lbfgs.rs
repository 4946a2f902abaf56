//! Limited-memory BFGS over matrix-shaped parameters.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub c1: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    pub grad_tol: f64,
    pub rel_decrease_tol: f64,
    pub max_iters: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 30,
            grad_tol: 1e-8,
            rel_decrease_tol: 1e-12,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LbfgsStatus {
    GradientTolerance,
    RelativeDecrease,
    MaxIterations,
    LineSearchFailed,
}

/// State reported to the observer after iteration `iter` (0 is the start).
#[derive(Debug, Clone, Copy)]
pub struct IterationInfo<'a> {
    pub iter: usize,
    pub x: &'a Matrix,
    pub loss: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Matrix,
    pub loss: f64,
    pub grad: Matrix,
    pub iterations: usize,
    pub status: LbfgsStatus,
}

/// Minimizes `objective`, which returns the loss and its gradient. Errors
/// raised by the objective during the line search count as an infinite loss;
/// an error at `init` is returned.
pub fn minimize<F, O>(mut objective: F, init: Matrix, opts: &LbfgsOptions, mut observer: O) -> Result<LbfgsResult>
where
    F: FnMut(&Matrix) -> Result<(f64, Matrix)>,
    O: FnMut(&IterationInfo<'_>),
{
    let (mut f, mut g) = objective(&init)?;
    if !f.is_finite() || !g.is_finite() {
        return Err(Error::Invalid(format!("objective not finite at the initial point (loss {f})")));
    }
    if g.shape() != init.shape() {
        return Err(Error::Shape {
            op: "lbfgs gradient",
            left: init.shape(),
            right: g.shape(),
        });
    }
    let mut x = init;
    let mut history: VecDeque<(Matrix, Matrix, f64)> = VecDeque::with_capacity(opts.memory);
    observer(&IterationInfo {
        iter: 0,
        x: &x,
        loss: f,
        grad_norm: g.frobenius_norm(),
        step: 0.0,
    });

    let mut iter = 0;
    let status = loop {
        if g.frobenius_norm() <= opts.grad_tol {
            break LbfgsStatus::GradientTolerance;
        }
        if iter >= opts.max_iters {
            break LbfgsStatus::MaxIterations;
        }

        let mut d = direction(&g, &history);
        let mut slope = g.dot(&d);
        if slope.is_nan() || slope >= 0.0 {
            history.clear();
            d = direction(&g, &history);
            slope = g.dot(&d);
        }
        let mut accepted = line_search(&mut objective, &x, f, &d, slope, opts);
        if accepted.is_none() && !history.is_empty() {
            history.clear();
            d = direction(&g, &history);
            slope = g.dot(&d);
            accepted = line_search(&mut objective, &x, f, &d, slope, opts);
        }
        let Some((alpha, x_new, f_new, g_new)) = accepted else {
            break LbfgsStatus::LineSearchFailed;
        };

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            if opts.memory > 0 {
                history.push_back((s, y, 1.0 / sy));
            }
        }

        let decrease = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        iter += 1;
        observer(&IterationInfo {
            iter,
            x: &x,
            loss: f,
            grad_norm: g.frobenius_norm(),
            step: alpha,
        });
        if decrease <= opts.rel_decrease_tol * (f + decrease).abs() {
            break LbfgsStatus::RelativeDecrease;
        }
    };

    Ok(LbfgsResult {
        x,
        loss: f,
        grad: g,
        iterations: iter,
        status,
    })
}

/// Two-loop recursion: returns `−H g`.
fn direction(g: &Matrix, history: &VecDeque<(Matrix, Matrix, f64)>) -> Matrix {
    let Some((s_last, y_last, _)) = history.back() else {
        let gn = g.frobenius_norm();
        return g.scale(-1.0 / gn.max(1.0));
    };
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * s.dot(&q);
        q = &q - &y.scale(a);
        alphas.push(a);
    }
    let gamma = s_last.dot(y_last) / y_last.dot(y_last);
    let mut r = q.scale(gamma);
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&r);
        r = &r + &s.scale(a - b);
    }
    -r
}

fn line_search<F>(
    objective: &mut F,
    x: &Matrix,
    f: f64,
    d: &Matrix,
    slope: f64,
    opts: &LbfgsOptions,
) -> Option<(f64, Matrix, f64, Matrix)>
where
    F: FnMut(&Matrix) -> Result<(f64, Matrix)>,
{
    let mut alpha = 1.0;
    for _ in 0..=opts.max_backtracks {
        let trial = x + &d.scale(alpha);
        if let Ok((ft, gt)) = objective(&trial) {
            if ft.is_finite() && gt.is_finite() && ft <= f + opts.c1 * alpha * slope {
                return Some((alpha, trial, ft, gt));
            }
        }
        alpha *= opts.shrink;
    }
    None
}
