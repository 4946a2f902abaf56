//! Forward-mode tangents and reverse-mode adjoints of the six solvers.
//!
//! Every rule reduces to one more solve of the same family of equation:
//! the tangent `Ṗ` solves the linearized equation, and the Lagrange
//! multiplier `S` solves the transposed one. The input adjoints are then
//! closed-form in `S`, `P` (and `K`, `Ã` for the Riccati kinds).
//!
//! | kind  | multiplier equation               | adjoints |
//! |-------|-----------------------------------|----------|
//! | csylv | `Aᵀ S + S Bᵀ + P̄ = 0`             | `Ā = S Pᵀ`, `B̄ = Pᵀ S`, `C̄ = S` |
//! | dsylv | `Aᵀ S Bᵀ − S + P̄ = 0`             | `Ā = S Bᵀ Pᵀ`, `B̄ = Pᵀ Aᵀ S`, `C̄ = S` |
//! | clyap | `Aᵀ S + S A + P̄ = 0`              | `Ā = S Pᵀ + Sᵀ P`, `Q̄ = S` |
//! | dlyap | `Aᵀ S A − S + P̄ = 0`              | `Ā = S A Pᵀ + Sᵀ A P`, `Q̄ = S` |
//! | care  | `Ã S + S Ãᵀ + sym(P̄) = 0`         | `Ā = 2 P S`, `B̄ = −2 P S Kᵀ`, `Q̄ = S`, `R̄ = K S Kᵀ` |
//! | dare  | `Ã S Ãᵀ − S + sym(P̄) = 0`         | `Ā = 2 P Ã S`, `B̄ = −2 P Ã S Kᵀ`, `Q̄ = S`, `R̄ = K S Kᵀ` |
//!
//! `B̄` for the Riccati kinds always has the shape of `B` (`n × m`).

use crate::equations::{
    solve_clyap, solve_csylv, solve_dlyap, solve_dsylv, EquationSpec, LyapunovCoeffs,
    RiccatiCoeffs, SolveReport, SylvesterCoeffs,
};
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Matrix};

/// Forward-mode input tangents. Absent entries are exact zeros.
///
/// `q` carries `Ċ` for the Sylvester kinds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tangents {
    pub a: Option<Matrix>,
    pub b: Option<Matrix>,
    pub q: Option<Matrix>,
    pub r: Option<Matrix>,
}

impl Tangents {
    pub fn only_a(a: Matrix) -> Self {
        Tangents {
            a: Some(a),
            ..Default::default()
        }
    }

    pub fn only_b(b: Matrix) -> Self {
        Tangents {
            b: Some(b),
            ..Default::default()
        }
    }

    pub fn only_q(q: Matrix) -> Self {
        Tangents {
            q: Some(q),
            ..Default::default()
        }
    }

    pub fn only_r(r: Matrix) -> Self {
        Tangents {
            r: Some(r),
            ..Default::default()
        }
    }

    /// `α self + β other`, treating absent entries as zero.
    pub fn combine(&self, alpha: f64, other: &Tangents, beta: f64) -> Tangents {
        fn mix(x: &Option<Matrix>, a: f64, y: &Option<Matrix>, b: f64) -> Option<Matrix> {
            match (x, y) {
                (Some(x), Some(y)) => Some(&x.scale(a) + &y.scale(b)),
                (Some(x), None) => Some(x.scale(a)),
                (None, Some(y)) => Some(y.scale(b)),
                (None, None) => None,
            }
        }
        Tangents {
            a: mix(&self.a, alpha, &other.a, beta),
            b: mix(&self.b, alpha, &other.b, beta),
            q: mix(&self.q, alpha, &other.q, beta),
            r: mix(&self.r, alpha, &other.r, beta),
        }
    }

    /// `Σ_X ⟨X̄, Ẋ⟩` over the inputs present in both bundles.
    pub fn dot(&self, adj: &Adjoints) -> f64 {
        fn term(t: &Option<Matrix>, a: Option<&Matrix>) -> f64 {
            match (t, a) {
                (Some(t), Some(a)) => t.dot(a),
                _ => 0.0,
            }
        }
        term(&self.a, Some(&adj.a))
            + term(&self.b, adj.b.as_ref())
            + term(&self.q, Some(&adj.q))
            + term(&self.r, adj.r.as_ref())
    }

    fn validate(&self, spec: &EquationSpec) -> Result<()> {
        let kind = spec.kind();
        let check = |name: &'static str, seed: &Option<Matrix>, input: Option<&Matrix>| -> Result<()> {
            match (seed, input) {
                (None, _) => Ok(()),
                (Some(s), Some(x)) if s.shape() == x.shape() => Ok(()),
                (Some(s), Some(x)) => Err(Error::Shape {
                    op: name,
                    left: s.shape(),
                    right: x.shape(),
                }),
                (Some(_), None) => Err(Error::Invalid(format!(
                    "{name} given but {kind} has no such input"
                ))),
            }
        };
        check("tangent A", &self.a, Some(spec.a()))?;
        check("tangent B", &self.b, spec.b())?;
        check("tangent Q", &self.q, Some(spec.q()))?;
        check("tangent R", &self.r, spec.r())
    }
}

/// Reverse-mode input adjoints, plus the Lagrange multiplier `S` they were
/// computed from. `q` holds `C̄` for the Sylvester kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjoints {
    pub a: Matrix,
    pub b: Option<Matrix>,
    pub q: Matrix,
    pub r: Option<Matrix>,
    pub multiplier: Matrix,
}

/// Tangent `Ṗ` of the solution of `spec` along `seeds`.
pub fn tangent(spec: &EquationSpec, report: &SolveReport, seeds: &Tangents) -> Result<Matrix> {
    seeds.validate(spec)?;
    match spec {
        EquationSpec::Csylv(c) => tangent_csylv(c, report, seeds),
        EquationSpec::Dsylv(c) => tangent_dsylv(c, report, seeds),
        EquationSpec::Clyap(c) => tangent_clyap(c, report, seeds),
        EquationSpec::Dlyap(c) => tangent_dlyap(c, report, seeds),
        EquationSpec::Care(c) => tangent_care(c, report, seeds),
        EquationSpec::Dare(c) => tangent_dare(c, report, seeds),
    }
}

/// Input adjoints for a downstream loss with `∂ℓ/∂P = pbar`.
pub fn adjoint(spec: &EquationSpec, report: &SolveReport, pbar: &Matrix) -> Result<Adjoints> {
    if pbar.shape() != report.p.shape() {
        return Err(Error::Shape {
            op: "adjoint P̄",
            left: pbar.shape(),
            right: report.p.shape(),
        });
    }
    match spec {
        EquationSpec::Csylv(c) => adjoint_csylv(c, report, pbar),
        EquationSpec::Dsylv(c) => adjoint_dsylv(c, report, pbar),
        EquationSpec::Clyap(c) => adjoint_clyap(c, report, pbar),
        EquationSpec::Dlyap(c) => adjoint_dlyap(c, report, pbar),
        EquationSpec::Care(c) => adjoint_care(c, report, pbar),
        EquationSpec::Dare(c) => adjoint_dare(c, report, pbar),
    }
}

fn zeros_like(m: &Matrix) -> Matrix {
    Matrix::zeros(m.rows(), m.cols())
}

fn add_opt(acc: &mut Matrix, term: Option<Matrix>) {
    if let Some(t) = term {
        *acc += &t;
    }
}

/// `A Ṗ + Ṗ B + (Ȧ P + P Ḃ + Ċ) = 0`
pub fn tangent_csylv(c: &SylvesterCoeffs, report: &SolveReport, seeds: &Tangents) -> Result<Matrix> {
    let p = &report.p;
    let mut rhs = seeds.q.clone().unwrap_or_else(|| zeros_like(p));
    add_opt(&mut rhs, seeds.a.as_ref().map(|da| da * p));
    add_opt(&mut rhs, seeds.b.as_ref().map(|db| p * db));
    Ok(solve_csylv(&c.a, &c.b, &rhs)?.p)
}

pub fn adjoint_csylv(c: &SylvesterCoeffs, report: &SolveReport, pbar: &Matrix) -> Result<Adjoints> {
    let p = &report.p;
    let s = solve_csylv(&c.a.transpose(), &c.b.transpose(), pbar)?.p;
    Ok(Adjoints {
        a: &s * &p.transpose(),
        b: Some(&p.transpose() * &s),
        q: s.clone(),
        r: None,
        multiplier: s,
    })
}

/// `A Ṗ B − Ṗ + (Ȧ P B + A P Ḃ + Ċ) = 0`
pub fn tangent_dsylv(c: &SylvesterCoeffs, report: &SolveReport, seeds: &Tangents) -> Result<Matrix> {
    let p = &report.p;
    let mut rhs = seeds.q.clone().unwrap_or_else(|| zeros_like(p));
    add_opt(&mut rhs, seeds.a.as_ref().map(|da| &(da * p) * &c.b));
    add_opt(&mut rhs, seeds.b.as_ref().map(|db| &(&c.a * p) * db));
    Ok(solve_dsylv(&c.a, &c.b, &rhs)?.p)
}

pub fn adjoint_dsylv(c: &SylvesterCoeffs, report: &SolveReport, pbar: &Matrix) -> Result<Adjoints> {
    let p = &report.p;
    let s = solve_dsylv(&c.a.transpose(), &c.b.transpose(), pbar)?.p;
    Ok(Adjoints {
        a: &(&s * &c.b.transpose()) * &p.transpose(),
        b: Some(&(&p.transpose() * &c.a.transpose()) * &s),
        q: s.clone(),
        r: None,
        multiplier: s,
    })
}

/// `A Ṗ + Ṗ Aᵀ + (Ȧ P + P Ȧᵀ + Q̇) = 0`
pub fn tangent_clyap(c: &LyapunovCoeffs, report: &SolveReport, seeds: &Tangents) -> Result<Matrix> {
    let p = &report.p;
    let mut rhs = seeds.q.clone().unwrap_or_else(|| zeros_like(p));
    if let Some(da) = &seeds.a {
        let t = da * p;
        rhs += &t;
        rhs += &(p * &da.transpose());
    }
    Ok(solve_clyap(&c.a, &rhs)?.p)
}

pub fn adjoint_clyap(c: &LyapunovCoeffs, report: &SolveReport, pbar: &Matrix) -> Result<Adjoints> {
    let p = &report.p;
    let s = solve_clyap(&c.a.transpose(), pbar)?.p;
    Ok(Adjoints {
        a: &(&s * &p.transpose()) + &(&s.transpose() * p),
        b: None,
        q: s.clone(),
        r: None,
        multiplier: s,
    })
}

/// `A Ṗ Aᵀ − Ṗ + (Ȧ P Aᵀ + A P Ȧᵀ + Q̇) = 0`
pub fn tangent_dlyap(c: &LyapunovCoeffs, report: &SolveReport, seeds: &Tangents) -> Result<Matrix> {
    let p = &report.p;
    let mut rhs = seeds.q.clone().unwrap_or_else(|| zeros_like(p));
    if let Some(da) = &seeds.a {
        rhs += &(&(da * p) * &c.a.transpose());
        rhs += &(&(&c.a * p) * &da.transpose());
    }
    Ok(solve_dlyap(&c.a, &rhs)?.p)
}

pub fn adjoint_dlyap(c: &LyapunovCoeffs, report: &SolveReport, pbar: &Matrix) -> Result<Adjoints> {
    let p = &report.p;
    let s = solve_dlyap(&c.a.transpose(), pbar)?.p;
    Ok(Adjoints {
        a: &(&(&s * &c.a) * &p.transpose()) + &(&(&s.transpose() * &c.a) * p),
        b: None,
        q: s.clone(),
        r: None,
        multiplier: s,
    })
}

/// Right-hand side `Ż + Żᵀ + Q̇ + Kᵀ Ṙ K` shared by both Riccati tangents,
/// where `Ż = left · (Ȧ − Ḃ K)`.
fn riccati_forcing(left: &Matrix, k: &Matrix, seeds: &Tangents, n: usize) -> Matrix {
    let mut rhs = seeds.q.clone().unwrap_or_else(|| Matrix::zeros(n, n));
    let drive = match (&seeds.a, &seeds.b) {
        (None, None) => None,
        (da, db) => {
            let mut d = da.clone().unwrap_or_else(|| Matrix::zeros(n, n));
            if let Some(db) = db {
                d = &d - &(db * k);
            }
            Some(d)
        }
    };
    if let Some(d) = drive {
        let z = left * &d;
        rhs += &z;
        rhs += &z.transpose();
    }
    if let Some(dr) = &seeds.r {
        rhs += &(&(&k.transpose() * dr) * k);
    }
    rhs
}

/// `Ṗ Ã + Ãᵀ Ṗ + (Ȧᵀ P + P Ȧ − P Ḃ K − Kᵀ Ḃᵀ P + Q̇ + Kᵀ Ṙ K) = 0`
pub fn tangent_care(c: &RiccatiCoeffs, report: &SolveReport, seeds: &Tangents) -> Result<Matrix> {
    let (k, closed_loop) = report.riccati_parts()?;
    let rhs = riccati_forcing(&report.p, k, seeds, c.a.rows());
    Ok(solve_clyap(&closed_loop.transpose(), &rhs)?.p)
}

pub fn adjoint_care(_c: &RiccatiCoeffs, report: &SolveReport, pbar: &Matrix) -> Result<Adjoints> {
    let (k, closed_loop) = report.riccati_parts()?;
    let p = &report.p;
    let s = solve_clyap(closed_loop, &symmetrize(pbar)?)?.p;
    let ps = p * &s;
    Ok(Adjoints {
        a: ps.scale(2.0),
        b: Some((&ps * &k.transpose()).scale(-2.0)),
        q: s.clone(),
        r: Some(&(k * &s) * &k.transpose()),
        multiplier: s,
    })
}

/// `Ãᵀ Ṗ Ã − Ṗ + (Ȧᵀ P Ã + Ãᵀ P Ȧ − Kᵀ Ḃᵀ P Ã − Ãᵀ P Ḃ K + Q̇ + Kᵀ Ṙ K) = 0`
pub fn tangent_dare(c: &RiccatiCoeffs, report: &SolveReport, seeds: &Tangents) -> Result<Matrix> {
    let (k, closed_loop) = report.riccati_parts()?;
    let left = &closed_loop.transpose() * &report.p;
    let rhs = riccati_forcing(&left, k, seeds, c.a.rows());
    Ok(solve_dlyap(&closed_loop.transpose(), &rhs)?.p)
}

pub fn adjoint_dare(_c: &RiccatiCoeffs, report: &SolveReport, pbar: &Matrix) -> Result<Adjoints> {
    let (k, closed_loop) = report.riccati_parts()?;
    let p = &report.p;
    let s = solve_dlyap(closed_loop, &symmetrize(pbar)?)?.p;
    let pas = &(p * closed_loop) * &s;
    Ok(Adjoints {
        a: pas.scale(2.0),
        b: Some((&pas * &k.transpose()).scale(-2.0)),
        q: s.clone(),
        r: Some(&(k * &s) * &k.transpose()),
        multiplier: s,
    })
}
