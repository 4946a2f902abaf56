//! Dense real linear algebra: the [`Matrix`] type, arithmetic, LU with
//! partial pivoting, Cholesky, Kronecker products and column-stacking
//! vectorization.

mod cholesky;
mod kron;
mod lu;
mod matrix;

pub use cholesky::{cholesky, is_positive_definite};
pub use kron::{kron, unvec, vec};
pub use lu::{lu_solve, LuFactor, PIVOT_RTOL};
pub use matrix::{core_arith, frobenius_norm, symmetrize, transpose, ArithOp, Matrix, Vector};
