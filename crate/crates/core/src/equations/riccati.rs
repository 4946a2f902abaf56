//! CARE / DARE via the structure-preserving doubling algorithm (SDA).
//!
//! The DARE `P = Aᵀ P (I + G P)⁻¹ A + Q` with `G = B R⁻¹ Bᵀ` is iterated
//! directly:
//!
//! ```text
//! W     = I + G_k H_k
//! A_k+1 = A_k W⁻¹ A_k
//! G_k+1 = G_k + A_k W⁻¹ G_k A_kᵀ
//! H_k+1 = H_k + A_kᵀ H_k W⁻¹ A_k        (H_k → P)
//! ```
//!
//! The CARE is first mapped to an equivalent DARE by a Cayley transform
//! with shift `γ > 0`.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, lu_solve, symmetrize, LuFactor, Matrix};

use super::linear::{solve_clyap, solve_dlyap};
use super::{EquationSpec, SolveReport, SolverOptions};

const MAX_SHIFT_RETRIES: usize = 5;

#[derive(Clone, Copy, PartialEq)]
enum Time {
    Continuous,
    Discrete,
}

/// Solves the CARE `Aᵀ P + P A − P B R⁻¹ Bᵀ P + Q = 0` for the stabilizing `P`.
pub fn solve_care(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<SolveReport> {
    solve_care_with(a, b, q, r, &SolverOptions::default())
}

pub fn solve_care_with(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let spec = EquationSpec::care(a.clone(), b.clone(), q.clone(), r.clone());
    solve_riccati(&spec, Time::Continuous, opts)
}

/// Solves the DARE `Aᵀ P A − P − Aᵀ P B (R + Bᵀ P B)⁻¹ Bᵀ P A + Q = 0` for the
/// stabilizing `P`.
pub fn solve_dare(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<SolveReport> {
    solve_dare_with(a, b, q, r, &SolverOptions::default())
}

pub fn solve_dare_with(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let spec = EquationSpec::dare(a.clone(), b.clone(), q.clone(), r.clone());
    solve_riccati(&spec, Time::Discrete, opts)
}

/// `K = R⁻¹ Bᵀ P`.
pub fn care_gain(b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    lu_solve(r, &(&b.transpose() * p))
}

/// `K = (R + Bᵀ P B)⁻¹ Bᵀ P A`.
pub fn dare_gain(a: &Matrix, b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let bt_p = &b.transpose() * p;
    lu_solve(&(r + &(&bt_p * b)), &(&bt_p * a))
}

fn gain(spec: &EquationSpec, time: Time, p: &Matrix) -> Result<Matrix> {
    let b = spec.b().expect("riccati spec has B");
    let r = spec.r().expect("riccati spec has R");
    match time {
        Time::Continuous => care_gain(b, r, p),
        Time::Discrete => dare_gain(spec.a(), b, r, p),
    }
}

fn solve_riccati(spec: &EquationSpec, time: Time, opts: &SolverOptions) -> Result<SolveReport> {
    spec.validate(opts)?;
    let (a, b, q, r) = (spec.a(), spec.b().unwrap(), spec.q(), spec.r().unwrap());
    cholesky(r)?;
    let n = a.rows();

    let g = symmetrize(&(b * &lu_solve(r, &b.transpose())?))?;
    let (a0, g0, h0) = match time {
        Time::Discrete => (a.clone(), g, q.clone()),
        Time::Continuous => cayley(a, &g, q)?,
    };

    let (mut p, mut iterations) = doubling(spec, a0, g0, h0, opts)?;
    let (mut residual, mut scale) = spec.residual(&p)?;

    // Newton–Kleinman polishing: each step is one Lyapunov solve in Ã.
    for _ in 0..opts.newton_steps {
        if residual <= opts.polish_rtol * scale {
            break;
        }
        let Ok(candidate) = newton_step(spec, time, &p) else {
            break;
        };
        let (res, sc) = spec.residual(&candidate)?;
        if res >= residual {
            break;
        }
        p = candidate;
        residual = res;
        scale = sc;
        iterations += 1;
    }

    if residual.is_nan() || residual > opts.residual_rtol * scale {
        return Err(Error::Convergence {
            iterations,
            residual,
        });
    }

    let k = gain(spec, time, &p)?;
    let closed_loop = a - &(b * &k);
    let mut warnings = Vec::new();
    if !closed_loop_is_stable(&closed_loop, time, n) {
        warnings.push("closed-loop matrix A - B K failed the stability probe".to_string());
    }

    Ok(SolveReport {
        p,
        residual,
        scale,
        iterations,
        gain: Some(k),
        closed_loop: Some(closed_loop),
        warnings,
    })
}

/// Maps `Aᵀ X + X A − X G X + H = 0` onto the DARE form consumed by
/// [`doubling`]:
///
/// ```text
/// A_γ = A − γ I,   W_γ = A_γᵀ + H A_γ⁻¹ G
/// A_0 = I + 2γ W_γ⁻ᵀ,   G_0 = 2γ A_γ⁻¹ G W_γ⁻¹,   H_0 = 2γ W_γ⁻¹ H A_γ⁻¹
/// ```
fn cayley(a: &Matrix, g: &Matrix, h: &Matrix) -> Result<(Matrix, Matrix, Matrix)> {
    let n = a.rows();
    let eye = Matrix::identity(n);
    let mut gamma = 1.0 + a.frobenius_norm();
    let mut last_err = None;
    for _ in 0..=MAX_SHIFT_RETRIES {
        match cayley_with_shift(a, g, h, gamma, &eye) {
            Ok(out) => return Ok(out),
            Err(e @ Error::Singular { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        gamma *= 2.0;
    }
    Err(Error::NoUniqueSolution(format!(
        "Cayley transform singular for every shift tried ({})",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn cayley_with_shift(
    a: &Matrix,
    g: &Matrix,
    h: &Matrix,
    gamma: f64,
    eye: &Matrix,
) -> Result<(Matrix, Matrix, Matrix)> {
    let a_shift = a - &eye.scale(gamma);
    let lu_a = LuFactor::new(&a_shift)?;
    let a_inv = lu_a.solve(eye)?;
    let w = &a_shift.transpose() + &(&(h * &a_inv) * g);
    let w_inv = LuFactor::new(&w)?.solve(eye)?;
    let two_gamma = 2.0 * gamma;
    let a0 = eye + &w_inv.transpose().scale(two_gamma);
    let g0 = symmetrize(&(&(&a_inv * g) * &w_inv).scale(two_gamma))?;
    let h0 = symmetrize(&(&(&w_inv * h) * &a_inv).scale(two_gamma))?;
    Ok((a0, g0, h0))
}

fn doubling(
    spec: &EquationSpec,
    mut ak: Matrix,
    mut gk: Matrix,
    mut hk: Matrix,
    opts: &SolverOptions,
) -> Result<(Matrix, usize)> {
    let n = ak.rows();
    let eye = Matrix::identity(n);
    let mut last_residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let w = &eye + &(&gk * &hk);
        let lu = LuFactor::new(&w).map_err(|e| {
            Error::NoUniqueSolution(format!("doubling step {iter} broke down: {e}"))
        })?;
        let w_a = lu.solve(&ak)?;
        let w_g = lu.solve(&gk)?;
        let a_next = &ak * &w_a;
        let g_next = symmetrize(&(&gk + &(&(&ak * &w_g) * &ak.transpose())))?;
        let h_next = symmetrize(&(&hk + &(&(&ak.transpose() * &hk) * &w_a)))?;
        if !h_next.is_finite() {
            break;
        }

        let update = (&h_next - &hk).frobenius_norm();
        let (residual, scale) = spec.residual(&h_next)?;
        last_residual = residual;
        if update <= opts.sda_update_rtol * h_next.frobenius_norm()
            || residual <= opts.sda_residual_rtol * scale
        {
            return Ok((h_next, iter));
        }
        ak = a_next;
        gk = g_next;
        hk = h_next;
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual: last_residual,
    })
}

fn newton_step(spec: &EquationSpec, time: Time, p: &Matrix) -> Result<Matrix> {
    let (a, b, q, r) = (spec.a(), spec.b().unwrap(), spec.q(), spec.r().unwrap());
    let k = gain(spec, time, p)?;
    let closed_loop_t = (a - &(b * &k)).transpose();
    let rhs = symmetrize(&(q + &(&(&k.transpose() * r) * &k)))?;
    let report = match time {
        Time::Continuous => solve_clyap(&closed_loop_t, &rhs)?,
        Time::Discrete => solve_dlyap(&closed_loop_t, &rhs)?,
    };
    Ok(report.p)
}

/// Eigenvalue-free stability probe: `Ã` is Hurwitz (Schur) iff the Lyapunov
/// equation with `Q = I` has a positive definite solution.
fn closed_loop_is_stable(closed_loop: &Matrix, time: Time, n: usize) -> bool {
    let eye = Matrix::identity(n);
    let probe = match time {
        Time::Continuous => solve_clyap(closed_loop, &eye),
        Time::Discrete => solve_dlyap(closed_loop, &eye),
    };
    probe.map(|r| cholesky(&r.p).is_ok()).unwrap_or(false)
}
