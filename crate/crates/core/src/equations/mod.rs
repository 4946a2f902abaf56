//! Solvers for the six matrix equations.
//!
//! | kind  | equation                                        |
//! |-------|-------------------------------------------------|
//! | csylv | `A P + P B + C = 0`                             |
//! | dsylv | `A P B − P + C = 0`                             |
//! | clyap | `A P + P Aᵀ + Q = 0`                            |
//! | dlyap | `A P Aᵀ − P + Q = 0`                            |
//! | care  | `Aᵀ P + P A − P B R⁻¹ Bᵀ P + Q = 0`             |
//! | dare  | `Aᵀ P A − P − Aᵀ P B (R + Bᵀ P B)⁻¹ Bᵀ P A + Q = 0` |
//!
//! The four linear equations are solved through their vectorized
//! `n² × n²` form. The Riccati equations use the structure-preserving
//! doubling algorithm followed by a few Newton–Kleinman polishing steps.

mod linear;
mod oracle;
mod riccati;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, Matrix};

pub use linear::{
    solve_clyap, solve_clyap_with, solve_csylv, solve_csylv_with, solve_dlyap, solve_dlyap_with,
    solve_dsylv, solve_dsylv_with,
};
pub use oracle::{kron_oracle_solve, ORACLE_MAX_DIM};
pub use riccati::{care_gain, dare_gain, solve_care, solve_care_with, solve_dare, solve_dare_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationKind {
    Csylv,
    Dsylv,
    Clyap,
    Dlyap,
    Care,
    Dare,
}

impl EquationKind {
    pub const ALL: [EquationKind; 6] = [
        EquationKind::Csylv,
        EquationKind::Dsylv,
        EquationKind::Clyap,
        EquationKind::Dlyap,
        EquationKind::Care,
        EquationKind::Dare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EquationKind::Csylv => "csylv",
            EquationKind::Dsylv => "dsylv",
            EquationKind::Clyap => "clyap",
            EquationKind::Dlyap => "dlyap",
            EquationKind::Care => "care",
            EquationKind::Dare => "dare",
        }
    }

    pub fn is_riccati(self) -> bool {
        matches!(self, EquationKind::Care | EquationKind::Dare)
    }

    pub fn is_linear(self) -> bool {
        !self.is_riccati()
    }
}

impl fmt::Display for EquationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EquationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EquationKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown equation kind `{s}`")))
    }
}

/// Coefficients of a Sylvester equation (`C` is the constant term).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SylvesterCoeffs {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "C")]
    pub c: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCoeffs {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "Q")]
    pub q: Matrix,
}

/// Coefficients of an algebraic Riccati equation; `B` is `n × m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiCoeffs {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "Q")]
    pub q: Matrix,
    #[serde(rename = "R")]
    pub r: Matrix,
}

/// One of the six equations together with its coefficients.
///
/// JSON form: `{"kind": "dare", "A": {..}, "B": {..}, "Q": {..}, "R": {..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EquationSpec {
    Csylv(SylvesterCoeffs),
    Dsylv(SylvesterCoeffs),
    Clyap(LyapunovCoeffs),
    Dlyap(LyapunovCoeffs),
    Care(RiccatiCoeffs),
    Dare(RiccatiCoeffs),
}

impl EquationSpec {
    pub fn csylv(a: Matrix, b: Matrix, c: Matrix) -> Self {
        EquationSpec::Csylv(SylvesterCoeffs { a, b, c })
    }

    pub fn dsylv(a: Matrix, b: Matrix, c: Matrix) -> Self {
        EquationSpec::Dsylv(SylvesterCoeffs { a, b, c })
    }

    pub fn clyap(a: Matrix, q: Matrix) -> Self {
        EquationSpec::Clyap(LyapunovCoeffs { a, q })
    }

    pub fn dlyap(a: Matrix, q: Matrix) -> Self {
        EquationSpec::Dlyap(LyapunovCoeffs { a, q })
    }

    pub fn care(a: Matrix, b: Matrix, q: Matrix, r: Matrix) -> Self {
        EquationSpec::Care(RiccatiCoeffs { a, b, q, r })
    }

    pub fn dare(a: Matrix, b: Matrix, q: Matrix, r: Matrix) -> Self {
        EquationSpec::Dare(RiccatiCoeffs { a, b, q, r })
    }

    pub fn kind(&self) -> EquationKind {
        match self {
            EquationSpec::Csylv(_) => EquationKind::Csylv,
            EquationSpec::Dsylv(_) => EquationKind::Dsylv,
            EquationSpec::Clyap(_) => EquationKind::Clyap,
            EquationSpec::Dlyap(_) => EquationKind::Dlyap,
            EquationSpec::Care(_) => EquationKind::Care,
            EquationSpec::Dare(_) => EquationKind::Dare,
        }
    }

    pub fn a(&self) -> &Matrix {
        match self {
            EquationSpec::Csylv(s) | EquationSpec::Dsylv(s) => &s.a,
            EquationSpec::Clyap(s) | EquationSpec::Dlyap(s) => &s.a,
            EquationSpec::Care(s) | EquationSpec::Dare(s) => &s.a,
        }
    }

    pub fn b(&self) -> Option<&Matrix> {
        match self {
            EquationSpec::Csylv(s) | EquationSpec::Dsylv(s) => Some(&s.b),
            EquationSpec::Clyap(_) | EquationSpec::Dlyap(_) => None,
            EquationSpec::Care(s) | EquationSpec::Dare(s) => Some(&s.b),
        }
    }

    /// `C` for Sylvester kinds, `Q` otherwise.
    pub fn q(&self) -> &Matrix {
        match self {
            EquationSpec::Csylv(s) | EquationSpec::Dsylv(s) => &s.c,
            EquationSpec::Clyap(s) | EquationSpec::Dlyap(s) => &s.q,
            EquationSpec::Care(s) | EquationSpec::Dare(s) => &s.q,
        }
    }

    pub fn r(&self) -> Option<&Matrix> {
        match self {
            EquationSpec::Care(s) | EquationSpec::Dare(s) => Some(&s.r),
            _ => None,
        }
    }

    /// Rebuilds a spec of the same kind from replacement inputs.
    ///
    /// Panics if `b` or `r` is missing for a kind that needs it.
    pub fn with_inputs(
        &self,
        a: Matrix,
        b: Option<Matrix>,
        q: Matrix,
        r: Option<Matrix>,
    ) -> EquationSpec {
        let b = || b.clone().expect("input B required");
        let r = || r.clone().expect("input R required");
        match self.kind() {
            EquationKind::Csylv => EquationSpec::csylv(a, b(), q),
            EquationKind::Dsylv => EquationSpec::dsylv(a, b(), q),
            EquationKind::Clyap => EquationSpec::clyap(a, q),
            EquationKind::Dlyap => EquationSpec::dlyap(a, q),
            EquationKind::Care => EquationSpec::care(a, b(), q, r()),
            EquationKind::Dare => EquationSpec::dare(a, b(), q, r()),
        }
    }

    /// Checks shape compatibility (and symmetry of `Q`, `R` for Riccati kinds).
    pub fn validate(&self, opts: &SolverOptions) -> Result<()> {
        match self {
            EquationSpec::Csylv(s) | EquationSpec::Dsylv(s) => {
                require_square("A", &s.a)?;
                same_shape("B", &s.b, &s.a)?;
                same_shape("C", &s.c, &s.a)
            }
            EquationSpec::Clyap(s) | EquationSpec::Dlyap(s) => {
                require_square("A", &s.a)?;
                same_shape("Q", &s.q, &s.a)
            }
            EquationSpec::Care(s) | EquationSpec::Dare(s) => validate_riccati(s, opts),
        }
    }

    pub fn solve(&self) -> Result<SolveReport> {
        self.solve_with(&SolverOptions::default())
    }

    pub fn solve_with(&self, opts: &SolverOptions) -> Result<SolveReport> {
        match self {
            EquationSpec::Csylv(s) => solve_csylv_with(&s.a, &s.b, &s.c, opts),
            EquationSpec::Dsylv(s) => solve_dsylv_with(&s.a, &s.b, &s.c, opts),
            EquationSpec::Clyap(s) => solve_clyap_with(&s.a, &s.q, opts),
            EquationSpec::Dlyap(s) => solve_dlyap_with(&s.a, &s.q, opts),
            EquationSpec::Care(s) => solve_care_with(&s.a, &s.b, &s.q, &s.r, opts),
            EquationSpec::Dare(s) => solve_dare_with(&s.a, &s.b, &s.q, &s.r, opts),
        }
    }

    /// Residual `‖F(P)‖_F` of the defining equation and the scale
    /// `max(1, Σ ‖term‖_F)` it should be compared against.
    pub fn residual(&self, p: &Matrix) -> Result<(f64, f64)> {
        let terms = match self {
            EquationSpec::Csylv(s) => vec![&s.a * p, p * &s.b, s.c.clone()],
            EquationSpec::Dsylv(s) => vec![&(&s.a * p) * &s.b, -p, s.c.clone()],
            EquationSpec::Clyap(s) => vec![&s.a * p, p * &s.a.transpose(), s.q.clone()],
            EquationSpec::Dlyap(s) => {
                vec![&(&s.a * p) * &s.a.transpose(), -p, s.q.clone()]
            }
            EquationSpec::Care(s) => {
                let bt_p = &s.b.transpose() * p;
                let gain = lu_solve(&s.r, &bt_p)?;
                vec![
                    &s.a.transpose() * p,
                    p * &s.a,
                    -(&bt_p.transpose() * &gain),
                    s.q.clone(),
                ]
            }
            EquationSpec::Dare(s) => {
                let at = s.a.transpose();
                let at_p_b = &(&at * p) * &s.b;
                let inner = &s.r + &(&(&s.b.transpose() * p) * &s.b);
                let cross = &at_p_b * &lu_solve(&inner, &at_p_b.transpose())?;
                vec![&(&at * p) * &s.a, -p, -cross, s.q.clone()]
            }
        };
        Ok(residual_of(&terms))
    }
}

pub(crate) fn residual_of(terms: &[Matrix]) -> (f64, f64) {
    let mut sum = Matrix::zeros(terms[0].rows(), terms[0].cols());
    let mut scale = 0.0;
    for t in terms {
        sum += t;
        scale += t.frobenius_norm();
    }
    (sum.frobenius_norm(), scale.max(1.0))
}

fn require_square(name: &'static str, m: &Matrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must be square, got {:?}", m.shape())))
    }
}

fn same_shape(name: &'static str, m: &Matrix, like: &Matrix) -> Result<()> {
    if m.shape() == like.shape() {
        Ok(())
    } else {
        Err(Error::Shape {
            op: name,
            left: m.shape(),
            right: like.shape(),
        })
    }
}

fn validate_riccati(s: &RiccatiCoeffs, opts: &SolverOptions) -> Result<()> {
    require_square("A", &s.a)?;
    same_shape("Q", &s.q, &s.a)?;
    require_square("R", &s.r)?;
    if s.b.rows() != s.a.rows() || s.b.cols() != s.r.rows() {
        return Err(Error::Shape {
            op: "B",
            left: s.b.shape(),
            right: (s.a.rows(), s.r.rows()),
        });
    }
    for (name, m) in [("Q", &s.q), ("R", &s.r)] {
        if !m.is_symmetric(opts.symmetry_tol) {
            return Err(Error::NotSymmetric {
                name,
                asymmetry: m.asymmetry(),
            });
        }
    }
    Ok(())
}

/// Tolerances and iteration limits shared by all solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Accept a solution when `residual ≤ residual_rtol · scale`.
    pub residual_rtol: f64,
    /// Doubling stops when `‖P_{k+1} − P_k‖ ≤ sda_update_rtol ‖P_{k+1}‖` ...
    pub sda_update_rtol: f64,
    /// ... or when the Riccati residual drops below `sda_residual_rtol · scale`.
    pub sda_residual_rtol: f64,
    pub max_iter: usize,
    pub newton_steps: usize,
    /// Newton polishing stops once `residual ≤ polish_rtol · scale`.
    pub polish_rtol: f64,
    /// Relative asymmetry tolerated in `Q` and `R`.
    pub symmetry_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            residual_rtol: 1e-10,
            sda_update_rtol: 1e-12,
            sda_residual_rtol: 1e-11,
            max_iter: 100,
            newton_steps: 3,
            polish_rtol: 1e-12,
            symmetry_tol: 1e-12,
        }
    }
}

/// Solution of one equation plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(rename = "P")]
    pub p: Matrix,
    /// `‖F(P)‖_F` for the defining equation `F(P) = 0`.
    pub residual: f64,
    /// `max(1, Σ ‖term‖_F)` over the terms of `F(P)`.
    pub scale: f64,
    pub iterations: usize,
    /// Feedback gain (Riccati kinds only).
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Matrix>,
    /// Closed-loop matrix `A − B K` (Riccati kinds only).
    #[serde(rename = "A_tilde", default, skip_serializing_if = "Option::is_none")]
    pub closed_loop: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.scale
    }

    pub(crate) fn riccati_parts(&self) -> Result<(&Matrix, &Matrix)> {
        match (&self.gain, &self.closed_loop) {
            (Some(k), Some(at)) => Ok((k, at)),
            _ => Err(Error::Invalid("report does not come from a Riccati solve".into())),
        }
    }
}
