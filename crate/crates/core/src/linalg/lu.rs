use crate::error::{Error, Result};

use super::Matrix;

/// Pivots with magnitude at or below `PIVOT_RTOL * max|a_ij|` are treated as zero.
pub const PIVOT_RTOL: f64 = 1e-13;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape {
                op: "lu",
                left: a.shape(),
                right: (a.cols(), a.rows()),
            });
        }
        let n = a.rows();
        let tol = PIVOT_RTOL * a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= tol || pivot == 0.0 {
                return Err(Error::Singular { index: k, pivot });
            }
            if p != k {
                perm.swap(p, k);
                let data = lu.as_mut_slice();
                for j in 0..n {
                    data.swap(k * n + j, p * n + j);
                }
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    let data = lu.as_mut_slice();
                    for j in (k + 1)..n {
                        data[i * n + j] -= f * data[k * n + j];
                    }
                }
            }
        }
        Ok(LuFactor { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `A X = rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        let n = self.dim();
        self.check_rhs(rhs)?;
        let m = rhs.cols();
        let mut x = Matrix::from_fn(n, m, |i, j| rhs[(self.perm[i], j)]);
        for c in 0..m {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        Ok(x)
    }

    /// Solves `Aᵀ X = rhs`.
    pub fn solve_transpose(&self, rhs: &Matrix) -> Result<Matrix> {
        let n = self.dim();
        self.check_rhs(rhs)?;
        let m = rhs.cols();
        let mut y = rhs.clone();
        for c in 0..m {
            // Uᵀ z = rhs
            for i in 0..n {
                let mut s = y[(i, c)];
                for k in 0..i {
                    s -= self.lu[(k, i)] * y[(k, c)];
                }
                y[(i, c)] = s / self.lu[(i, i)];
            }
            // Lᵀ w = z
            for i in (0..n).rev() {
                let mut s = y[(i, c)];
                for k in (i + 1)..n {
                    s -= self.lu[(k, i)] * y[(k, c)];
                }
                y[(i, c)] = s;
            }
        }
        let mut x = Matrix::zeros(n, m);
        for i in 0..n {
            for c in 0..m {
                x[(self.perm[i], c)] = y[(i, c)];
            }
        }
        Ok(x)
    }

    fn check_rhs(&self, rhs: &Matrix) -> Result<()> {
        if rhs.rows() != self.dim() {
            return Err(Error::Shape {
                op: "lu_solve",
                left: (self.dim(), self.dim()),
                right: rhs.shape(),
            });
        }
        Ok(())
    }
}

/// Solves `a X = rhs` by LU with partial pivoting.
pub fn lu_solve(a: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    LuFactor::new(a)?.solve(rhs)
}
