use crate::error::{Error, Result};

use super::{Matrix, Vector};

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    Matrix::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// Column-stacking vectorization.
pub fn vec(a: &Matrix) -> Vector {
    let (r, c) = a.shape();
    let mut out = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            out.push(a[(i, j)]);
        }
    }
    Vector::from_vec(out)
}

/// Inverse of [`vec`].
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::Shape {
            op: "unvec",
            left: (v.len(), 1),
            right: (rows, cols),
        });
    }
    let s = v.as_slice();
    Ok(Matrix::from_fn(rows, cols, |i, j| s[j * rows + i]))
}
