use thiserror::Error;

/// Errors produced by the solvers, derivative rules and tooling in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix is singular to working precision (pivot {index}, |pivot| = {pivot:e})")]
    Singular { index: usize, pivot: f64 },

    #[error("matrix is not positive definite (failed at column {index})")]
    NotPositiveDefinite { index: usize },

    #[error("{name} must be symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { name: &'static str, asymmetry: f64 },

    #[error("equation has no unique solution: {0}")]
    NoUniqueSolution(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("residual {residual:e} exceeds bound {bound:e}")]
    Inaccurate { residual: f64, bound: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("solver failed at perturbed point (try a smaller step): {0}")]
    Perturbation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
