use crate::error::{Error, Result};
use crate::linalg::{kron, lu_solve, unvec, vec, Matrix, Vector};

use super::EquationSpec;

/// The oracle builds an `n² × n²` system; beyond this it is impractically slow.
pub const ORACLE_MAX_DIM: usize = 64;

/// Reference solution of a linear matrix equation from its Kronecker form,
/// built with explicit [`kron`] products:
///
/// * csylv: `(I ⊗ A + Bᵀ ⊗ I) vec P = −vec C`
/// * dsylv: `(Bᵀ ⊗ A − I) vec P = −vec C`
/// * clyap: `(I ⊗ A + A ⊗ I) vec P = −vec Q`
/// * dlyap: `(A ⊗ A − I) vec P = −vec Q`
pub fn kron_oracle_solve(spec: &EquationSpec) -> Result<Matrix> {
    let a = spec.a();
    let n = a.rows();
    if n > ORACLE_MAX_DIM {
        return Err(Error::Invalid(format!(
            "oracle limited to n <= {ORACLE_MAX_DIM}, got {n}"
        )));
    }
    let i = Matrix::identity(n);
    let inn = Matrix::identity(n * n);
    let op = match spec {
        EquationSpec::Csylv(s) => &kron(&i, &s.a) + &kron(&s.b.transpose(), &i),
        EquationSpec::Dsylv(s) => &kron(&s.b.transpose(), &s.a) - &inn,
        EquationSpec::Clyap(s) => &kron(&i, &s.a) + &kron(&s.a, &i),
        EquationSpec::Dlyap(s) => &kron(&s.a, &s.a) - &inn,
        EquationSpec::Care(_) | EquationSpec::Dare(_) => {
            return Err(Error::Invalid(
                "kron oracle covers only the linear equations".into(),
            ))
        }
    };
    let rhs = -vec(spec.q()).to_column();
    let x = lu_solve(&op, &rhs).map_err(|e| match e {
        Error::Singular { .. } => Error::NoUniqueSolution(e.to_string()),
        other => other,
    })?;
    unvec(&Vector::from_vec(x.into_vec()), n, n)
}
