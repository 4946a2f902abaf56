//! Sylvester and Lyapunov solvers via the vectorized `n² × n²` system.
//!
//! With column-stacked `vec`, entry `P[i, j]` sits at index `i + n j`. The
//! operator is filled entrywise from the coefficient matrices, solved by LU
//! and refined once against the assembled operator.

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, unvec, vec, LuFactor, Matrix, Vector};

use super::{EquationSpec, SolveReport, SolverOptions};

#[derive(Clone, Copy)]
enum Form {
    /// `A P + P B`
    Continuous,
    /// `A P B − P`
    Discrete,
}

fn assemble(a: &Matrix, b: &Matrix, form: Form) -> Matrix {
    let n = a.rows();
    let nn = n * n;
    let mut op = Matrix::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            match form {
                Form::Continuous => {
                    for k in 0..n {
                        op[(row, k + n * j)] += a[(i, k)];
                    }
                    for l in 0..n {
                        op[(row, i + n * l)] += b[(l, j)];
                    }
                }
                Form::Discrete => {
                    for l in 0..n {
                        let blj = b[(l, j)];
                        if blj == 0.0 {
                            continue;
                        }
                        for k in 0..n {
                            op[(row, k + n * l)] += a[(i, k)] * blj;
                        }
                    }
                    op[(row, row)] -= 1.0;
                }
            }
        }
    }
    op
}

/// Solves `op(P) + C = 0` for the operator selected by `form`.
fn solve_vectorized(a: &Matrix, b: &Matrix, c: &Matrix, form: Form) -> Result<Matrix> {
    let n = a.rows();
    let op = assemble(a, b, form);
    let lu = LuFactor::new(&op).map_err(|e| match e {
        Error::Singular { index, pivot } => Error::NoUniqueSolution(format!(
            "vectorized operator is singular (pivot {index}, |pivot| = {pivot:e})"
        )),
        other => other,
    })?;
    let rhs = -vec(c).to_column();
    let mut x = lu.solve(&rhs)?;
    let r = &rhs - &(&op * &x);
    x += &lu.solve(&r)?;
    unvec(&Vector::from_vec(x.into_vec()), n, n)
}

fn finish(spec: &EquationSpec, p: Matrix, opts: &SolverOptions) -> Result<SolveReport> {
    let (residual, scale) = spec.residual(&p)?;
    if residual.is_nan() || residual > opts.residual_rtol * scale {
        return Err(Error::Inaccurate {
            residual,
            bound: opts.residual_rtol * scale,
        });
    }
    Ok(SolveReport {
        p,
        residual,
        scale,
        iterations: 1,
        gain: None,
        closed_loop: None,
        warnings: Vec::new(),
    })
}

/// Solves `A P + P B + C = 0`.
pub fn solve_csylv(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<SolveReport> {
    solve_csylv_with(a, b, c, &SolverOptions::default())
}

pub fn solve_csylv_with(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let spec = EquationSpec::csylv(a.clone(), b.clone(), c.clone());
    spec.validate(opts)?;
    let p = solve_vectorized(a, b, c, Form::Continuous)?;
    finish(&spec, p, opts)
}

/// Solves `A P B − P + C = 0`.
pub fn solve_dsylv(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<SolveReport> {
    solve_dsylv_with(a, b, c, &SolverOptions::default())
}

pub fn solve_dsylv_with(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let spec = EquationSpec::dsylv(a.clone(), b.clone(), c.clone());
    spec.validate(opts)?;
    let p = solve_vectorized(a, b, c, Form::Discrete)?;
    finish(&spec, p, opts)
}

/// Solves `A P + P Aᵀ + Q = 0`. A symmetric `Q` yields a symmetrized `P`.
pub fn solve_clyap(a: &Matrix, q: &Matrix) -> Result<SolveReport> {
    solve_clyap_with(a, q, &SolverOptions::default())
}

pub fn solve_clyap_with(a: &Matrix, q: &Matrix, opts: &SolverOptions) -> Result<SolveReport> {
    let spec = EquationSpec::clyap(a.clone(), q.clone());
    spec.validate(opts)?;
    let mut p = solve_vectorized(a, &a.transpose(), q, Form::Continuous)?;
    if q.is_symmetric(opts.symmetry_tol) {
        p = symmetrize(&p)?;
    }
    finish(&spec, p, opts)
}

/// Solves `A P Aᵀ − P + Q = 0`. A symmetric `Q` yields a symmetrized `P`.
pub fn solve_dlyap(a: &Matrix, q: &Matrix) -> Result<SolveReport> {
    solve_dlyap_with(a, q, &SolverOptions::default())
}

pub fn solve_dlyap_with(a: &Matrix, q: &Matrix, opts: &SolverOptions) -> Result<SolveReport> {
    let spec = EquationSpec::dlyap(a.clone(), q.clone());
    spec.validate(opts)?;
    let mut p = solve_vectorized(a, &a.transpose(), q, Form::Discrete)?;
    if q.is_symmetric(opts.symmetry_tol) {
        p = symmetrize(&p)?;
    }
    finish(&spec, p, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_positive_definite;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (a - b).frobenius_norm() <= tol
    }

    #[test]
    fn csylv_scalar_and_diagonal() {
        let r = solve_csylv(&Matrix::scalar(1.0), &Matrix::scalar(1.0), &Matrix::scalar(-2.0)).unwrap();
        assert!(close(&r.p, &Matrix::scalar(1.0), 1e-14));
        let i2 = Matrix::identity(2);
        let r = solve_csylv(&i2, &i2, &i2.scale(-2.0)).unwrap();
        assert!(close(&r.p, &i2, 1e-14));
        assert!(r.residual <= 1e-14);
    }

    #[test]
    fn dsylv_degenerate_and_scalar() {
        let q = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let z = Matrix::zeros(2, 2);
        assert_eq!(solve_dsylv(&z, &z, &q).unwrap().p, q);
        let h = Matrix::scalar(0.5);
        let r = solve_dsylv(&h, &h, &Matrix::scalar(0.75)).unwrap();
        assert!(close(&r.p, &Matrix::scalar(1.0), 1e-14));
    }

    #[test]
    fn clyap_cases() {
        let r = solve_clyap(&Matrix::scalar(-1.0), &Matrix::scalar(2.0)).unwrap();
        assert!(close(&r.p, &Matrix::scalar(1.0), 1e-14));
        let i2 = Matrix::identity(2);
        let r = solve_clyap(&i2.scale(-1.0), &i2.scale(2.0)).unwrap();
        assert!(close(&r.p, &i2, 1e-14));
        // Hurwitz A with PD Q gives a PD P.
        let a = Matrix::from_rows(&[[-1.0, 3.0], [0.0, -2.0]]);
        let r = solve_clyap(&a, &i2).unwrap();
        assert_eq!(r.p.asymmetry(), 0.0);
        assert!(is_positive_definite(&r.p));
    }

    #[test]
    fn dlyap_cases() {
        let q = Matrix::from_rows(&[[2.0, 1.0], [1.0, 3.0]]);
        assert_eq!(solve_dlyap(&Matrix::zeros(2, 2), &q).unwrap().p, q);
        let r = solve_dlyap(&Matrix::scalar(0.5), &Matrix::scalar(0.75)).unwrap();
        assert!(close(&r.p, &Matrix::scalar(1.0), 1e-14));
    }

    #[test]
    fn nonsymmetric_q_is_not_symmetrized() {
        let a = Matrix::from_rows(&[[-1.0, 0.3], [0.2, -2.0]]);
        let q = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        let r = solve_clyap(&a, &q).unwrap();
        assert!(r.p.asymmetry() > 1e-3);
        assert!(r.residual < 1e-13);
    }

    #[test]
    fn common_eigenvalue_has_no_unique_solution() {
        let a = Matrix::scalar(1.0);
        let err = solve_csylv(&a, &Matrix::scalar(-1.0), &Matrix::scalar(1.0)).unwrap_err();
        assert!(matches!(err, Error::NoUniqueSolution(_)));
        let err = solve_dlyap(&Matrix::identity(2), &Matrix::identity(2)).unwrap_err();
        assert!(matches!(err, Error::NoUniqueSolution(_)));
    }
}
