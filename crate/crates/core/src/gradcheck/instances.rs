//! Random well-posed test instances.
//!
//! Stable matrices are built without eigendecompositions: `σ̂` estimates
//! `‖M‖₂ ≥ ρ(M)` by 50 power iterations on `MᵀM`, then
//! `A = M − (σ̂ + ½) I` (Hurwitz) or `A = M / (σ̂ + ½)` (Schur stable).

use crate::derivatives::Tangents;
use crate::equations::{EquationKind, EquationSpec};
use crate::linalg::{symmetrize, Matrix};
use crate::rng::NormalRng;

const MARGIN: f64 = 0.5;
const POWER_STEPS: usize = 50;

/// Power-iteration estimate of the largest singular value.
pub fn spectral_norm_estimate(m: &Matrix) -> f64 {
    let n = m.cols();
    if n == 0 {
        return 0.0;
    }
    let mtm = &m.transpose() * m;
    let mut v = Matrix::from_fn(n, 1, |i, _| 1.0 + 0.1 * i as f64);
    let mut lambda = 0.0;
    for _ in 0..POWER_STEPS {
        let w = &mtm * &v;
        let norm = w.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / v.frobenius_norm();
        v = w.scale(1.0 / norm);
    }
    lambda.sqrt()
}

fn scaled_gaussian(rng: &mut NormalRng, rows: usize, cols: usize) -> Matrix {
    rng.matrix(rows, cols).scale(1.0 / (cols.max(1) as f64).sqrt())
}

pub fn hurwitz(rng: &mut NormalRng, n: usize) -> Matrix {
    let m = scaled_gaussian(rng, n, n);
    let shift = spectral_norm_estimate(&m) + MARGIN;
    &m - &Matrix::identity(n).scale(shift)
}

pub fn schur_stable(rng: &mut NormalRng, n: usize) -> Matrix {
    let m = scaled_gaussian(rng, n, n);
    m.scale(1.0 / (spectral_norm_estimate(&m) + MARGIN))
}

/// `G Gᵀ / n + shift · I`.
pub fn spd(rng: &mut NormalRng, n: usize, shift: f64) -> Matrix {
    let g = scaled_gaussian(rng, n, n);
    symmetrize(&(&(&g * &g.transpose()) + &Matrix::identity(n).scale(shift))).unwrap()
}

pub fn symmetric(rng: &mut NormalRng, n: usize) -> Matrix {
    symmetrize(&rng.matrix(n, n)).unwrap()
}

/// A solvable instance of `kind` with state dimension `n` (and `m` inputs
/// for the Riccati kinds).
pub fn random_spec(kind: EquationKind, n: usize, m: usize, rng: &mut NormalRng) -> EquationSpec {
    match kind {
        EquationKind::Csylv => {
            let a = hurwitz(rng, n);
            let b = hurwitz(rng, n);
            EquationSpec::csylv(a, b, rng.matrix(n, n))
        }
        EquationKind::Dsylv => {
            let a = schur_stable(rng, n);
            let b = schur_stable(rng, n);
            EquationSpec::dsylv(a, b, rng.matrix(n, n))
        }
        EquationKind::Clyap => {
            let a = hurwitz(rng, n);
            EquationSpec::clyap(a, spd(rng, n, 0.0))
        }
        EquationKind::Dlyap => {
            let a = schur_stable(rng, n);
            EquationSpec::dlyap(a, spd(rng, n, 0.0))
        }
        EquationKind::Care | EquationKind::Dare => {
            let a = scaled_gaussian(rng, n, n);
            let b = scaled_gaussian(rng, n, m);
            let q = spd(rng, n, 0.5);
            let r = spd(rng, m, 1.0);
            if kind == EquationKind::Care {
                EquationSpec::care(a, b, q, r)
            } else {
                EquationSpec::dare(a, b, q, r)
            }
        }
    }
}

/// Gaussian tangents for every input of `spec`; `Q̇`, `Ṙ` are symmetric for
/// the Riccati kinds.
pub fn random_tangents(spec: &EquationSpec, rng: &mut NormalRng) -> Tangents {
    let riccati = spec.kind().is_riccati();
    let mut draw = |m: &Matrix, sym: bool| {
        let d = rng.matrix(m.rows(), m.cols());
        if sym {
            symmetrize(&d).unwrap()
        } else {
            d
        }
    };
    Tangents {
        a: Some(draw(spec.a(), false)),
        b: spec.b().map(|b| draw(b, false)),
        q: Some(draw(spec.q(), riccati)),
        r: spec.r().map(|r| draw(r, true)),
    }
}

/// Gaussian solution adjoint, symmetrized for the Riccati kinds.
pub fn random_pbar(spec: &EquationSpec, rng: &mut NormalRng) -> Matrix {
    let n = spec.a().rows();
    if spec.kind().is_riccati() {
        symmetric(rng, n)
    } else {
        rng.matrix(n, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_positive_definite;

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Matrix::from_diag(&[3.0, -5.0, 1.0]);
        assert!((spectral_norm_estimate(&m) - 5.0).abs() < 1e-6);
        assert_eq!(spectral_norm_estimate(&Matrix::zeros(2, 2)), 0.0);
    }

    #[test]
    fn generated_matrices_are_stable() {
        let mut rng = NormalRng::new(3);
        for n in [1, 2, 5, 8] {
            // Lyapunov probes double as stability certificates.
            let a = hurwitz(&mut rng, n);
            let p = crate::equations::solve_clyap(&a, &Matrix::identity(n)).unwrap().p;
            assert!(is_positive_definite(&p));
            let a = schur_stable(&mut rng, n);
            let p = crate::equations::solve_dlyap(&a, &Matrix::identity(n)).unwrap().p;
            assert!(is_positive_definite(&p));
        }
    }
}
