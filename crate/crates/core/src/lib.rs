//! Solvers and exact derivative rules for continuous and discrete Sylvester,
//! Lyapunov and algebraic Riccati equations.
//!
//! Every solver has a forward-mode tangent rule and a reverse-mode adjoint
//! rule in [`derivatives`]. The [`ad`] tape composes those rules with basic
//! matrix primitives, which is enough to differentiate the trajectory
//! matching loss used by [`inverse_lqr`] to recover an LQR state cost from
//! observed closed-loop trajectories.
//!
//! ```
//! use mateq::{derivatives, EquationSpec, Matrix};
//!
//! // a p + p b + c = 0 with a = b = 1, c = -2.
//! let spec = EquationSpec::csylv(Matrix::scalar(1.0), Matrix::scalar(1.0), Matrix::scalar(-2.0));
//! let report = spec.solve().unwrap();
//! assert_eq!(report.p[(0, 0)], 1.0);
//!
//! let adj = derivatives::adjoint(&spec, &report, &Matrix::scalar(2.0)).unwrap();
//! assert_eq!(adj.a[(0, 0)], -1.0);
//! ```

pub mod ad;
pub mod derivatives;
pub mod equations;
pub mod error;
pub mod gradcheck;
pub mod inverse_lqr;
pub mod lbfgs;
pub mod linalg;
pub mod rng;

pub use derivatives::{Adjoints, Tangents};
pub use equations::{EquationKind, EquationSpec, SolveReport, SolverOptions};
pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
