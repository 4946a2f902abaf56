//! Minimal reverse-mode tape over a closed set of matrix primitives.
//!
//! Primal values are computed eagerly by [`Tape::record`]; the tape only
//! exists so that [`Tape::backward`] can sweep the nodes in reverse order.
//! Solver nodes keep their [`SolveReport`] and dispatch to the adjoint rules
//! in [`crate::derivatives`].

use std::collections::BTreeMap;

use crate::derivatives::adjoint;
use crate::equations::{EquationKind, EquationSpec, SolveReport, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{core_arith, ArithOp, LuFactor, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The primitives a tape can record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Transpose,
    /// `X = A⁻¹ B` for inputs `[A, B]`.
    LuSolve,
    Neg,
    Scale(f64),
    /// `Σ (X − Y)²` as a 1×1 matrix, inputs `[X, Y]`.
    SqErr,
    /// Inputs `[A, B, C]`, `[A, Q]` or `[A, B, Q, R]` depending on the kind.
    Solve(EquationKind),
}

impl Primitive {
    fn arity(self) -> usize {
        match self {
            Primitive::Transpose | Primitive::Neg | Primitive::Scale(_) => 1,
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::LuSolve | Primitive::SqErr => 2,
            Primitive::Solve(k) => match k {
                EquationKind::Csylv | EquationKind::Dsylv => 3,
                EquationKind::Clyap | EquationKind::Dlyap => 2,
                EquationKind::Care | EquationKind::Dare => 4,
            },
        }
    }
}

#[derive(Debug, Clone)]
enum Saved {
    None,
    Lu(LuFactor),
    Solve(Box<(EquationSpec, SolveReport)>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Option<Primitive>,
    inputs: Vec<NodeId>,
    value: Matrix,
    saved: Saved,
}

/// Leaf adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    leaves: BTreeMap<NodeId, Matrix>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.leaves.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &Matrix)> {
        self.leaves.iter()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    options: SolverOptions,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn with_options(options: SolverOptions) -> Self {
        Tape {
            nodes: Vec::new(),
            options,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Inputs of the graph (parameters and constants alike).
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(None, Vec::new(), value, Saved::None)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Saved solver output of a [`Primitive::Solve`] node.
    pub fn report(&self, id: NodeId) -> Option<&SolveReport> {
        match &self.nodes[id.0].saved {
            Saved::Solve(s) => Some(&s.1),
            _ => None,
        }
    }

    fn push(&mut self, op: Option<Primitive>, inputs: Vec<NodeId>, value: Matrix, saved: Saved) -> NodeId {
        self.nodes.push(Node {
            op,
            inputs,
            value,
            saved,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Evaluates `op` on the values of `inputs` and appends the node.
    pub fn record(&mut self, op: Primitive, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.len() != op.arity() {
            return Err(Error::Invalid(format!(
                "{op:?} takes {} inputs, got {}",
                op.arity(),
                inputs.len()
            )));
        }
        if let Some(bad) = inputs.iter().find(|id| id.0 >= self.nodes.len()) {
            return Err(Error::Invalid(format!("unknown node {}", bad.0)));
        }
        let v = |i: usize| &self.nodes[inputs[i].0].value;
        let (value, saved) = match op {
            Primitive::Add => (core_arith(v(0), v(1), ArithOp::Add)?, Saved::None),
            Primitive::Sub => (core_arith(v(0), v(1), ArithOp::Sub)?, Saved::None),
            Primitive::Mul => (core_arith(v(0), v(1), ArithOp::Mul)?, Saved::None),
            Primitive::Transpose => (v(0).transpose(), Saved::None),
            Primitive::Neg => (-v(0), Saved::None),
            Primitive::Scale(s) => (v(0).scale(s), Saved::None),
            Primitive::LuSolve => {
                let lu = LuFactor::new(v(0))?;
                (lu.solve(v(1))?, Saved::Lu(lu))
            }
            Primitive::SqErr => {
                let d = core_arith(v(0), v(1), ArithOp::Sub)?;
                (Matrix::scalar(d.dot(&d)), Saved::None)
            }
            Primitive::Solve(kind) => {
                let spec = match kind {
                    EquationKind::Csylv => EquationSpec::csylv(v(0).clone(), v(1).clone(), v(2).clone()),
                    EquationKind::Dsylv => EquationSpec::dsylv(v(0).clone(), v(1).clone(), v(2).clone()),
                    EquationKind::Clyap => EquationSpec::clyap(v(0).clone(), v(1).clone()),
                    EquationKind::Dlyap => EquationSpec::dlyap(v(0).clone(), v(1).clone()),
                    EquationKind::Care => {
                        EquationSpec::care(v(0).clone(), v(1).clone(), v(2).clone(), v(3).clone())
                    }
                    EquationKind::Dare => {
                        EquationSpec::dare(v(0).clone(), v(1).clone(), v(2).clone(), v(3).clone())
                    }
                };
                let report = spec.solve_with(&self.options)?;
                (report.p.clone(), Saved::Solve(Box::new((spec, report))))
            }
        };
        Ok(self.push(Some(op), inputs.to_vec(), value, saved))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Primitive::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Primitive::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Primitive::Mul, &[a, b])
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Primitive::Transpose, &[a])
    }

    pub fn lu_solve(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Primitive::LuSolve, &[a, b])
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Primitive::Neg, &[a])
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        self.record(Primitive::Scale(s), &[a])
    }

    pub fn sq_err(&mut self, x: NodeId, y: NodeId) -> Result<NodeId> {
        self.record(Primitive::SqErr, &[x, y])
    }

    pub fn solve(&mut self, kind: EquationKind, inputs: &[NodeId]) -> Result<NodeId> {
        self.record(Primitive::Solve(kind), inputs)
    }

    /// Reverse sweep from a 1×1 `output`, seeded with 1. Returns the
    /// accumulated adjoint of every leaf (zero for leaves `output` does not
    /// depend on).
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        let out = self
            .nodes
            .get(output.0)
            .ok_or_else(|| Error::Invalid(format!("unknown node {}", output.0)))?;
        if out.value.shape() != (1, 1) {
            return Err(Error::Invalid(format!(
                "backward needs a scalar output, got {:?}",
                out.value.shape()
            )));
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        adj[output.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let Some(op) = node.op else {
                adj[idx] = Some(g);
                continue;
            };
            let ins = &node.inputs;
            let val = |i: usize| &self.nodes[ins[i].0].value;
            let mut contribs: Vec<(NodeId, Matrix)> = Vec::with_capacity(ins.len());
            match op {
                Primitive::Add => {
                    contribs.push((ins[0], g.clone()));
                    contribs.push((ins[1], g));
                }
                Primitive::Sub => {
                    contribs.push((ins[0], g.clone()));
                    contribs.push((ins[1], -g));
                }
                Primitive::Mul => {
                    contribs.push((ins[0], &g * &val(1).transpose()));
                    contribs.push((ins[1], &val(0).transpose() * &g));
                }
                Primitive::Transpose => contribs.push((ins[0], g.transpose())),
                Primitive::Neg => contribs.push((ins[0], -g)),
                Primitive::Scale(s) => contribs.push((ins[0], g.scale(s))),
                Primitive::LuSolve => {
                    let Saved::Lu(lu) = &node.saved else {
                        unreachable!("lu_solve node without factorization")
                    };
                    let b_bar = lu.solve_transpose(&g)?;
                    let a_bar = -(&b_bar * &node.value.transpose());
                    contribs.push((ins[0], a_bar));
                    contribs.push((ins[1], b_bar));
                }
                Primitive::SqErr => {
                    let d = val(0) - val(1);
                    let gx = d.scale(2.0 * g[(0, 0)]);
                    contribs.push((ins[1], -&gx));
                    contribs.push((ins[0], gx));
                }
                Primitive::Solve(_) => {
                    let Saved::Solve(saved) = &node.saved else {
                        unreachable!("solve node without report")
                    };
                    let (spec, report) = saved.as_ref();
                    let a = adjoint(spec, report, &g)?;
                    let mut parts = vec![a.a];
                    parts.extend(a.b);
                    parts.push(a.q);
                    parts.extend(a.r);
                    contribs.extend(ins.iter().copied().zip(parts));
                }
            }
            for (id, c) in contribs {
                match &mut adj[id.0] {
                    Some(acc) => *acc += &c,
                    slot @ None => *slot = Some(c),
                }
            }
        }

        let leaves = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.op.is_none())
            .map(|(i, n)| {
                let g = adj
                    .get_mut(i)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Matrix::zeros(n.value.rows(), n.value.cols()));
                (NodeId(i), g)
            })
            .collect();
        Ok(Gradients { leaves })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primal_values() {
        let mut t = Tape::new();
        let i = t.leaf(Matrix::identity(2));
        let x = t.leaf(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let y = t.mul(i, x).unwrap();
        assert_eq!(t.value(y), t.value(x));
        let e = t.sq_err(x, i).unwrap();
        assert_eq!(t.value(e)[(0, 0)], 0.0 + 4.0 + 9.0 + 9.0);
        let s = Matrix::scalar(1.0);
        let (a, b, q, r) = (t.leaf(s.clone()), t.leaf(s.clone()), t.leaf(s.clone()), t.leaf(s));
        let p = t.solve(EquationKind::Dare, &[a, b, q, r]).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((t.value(p)[(0, 0)] - phi).abs() < 1e-12);
        assert!(t.report(p).unwrap().gain.is_some());
    }

    #[test]
    fn quadratic_gradient() {
        let mut t = Tape::new();
        let xv = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]);
        let cv = Matrix::from_rows(&[[0.0, 1.0], [1.0, 1.0]]);
        let x = t.leaf(xv.clone());
        let c = t.leaf(cv.clone());
        let l = t.sq_err(x, c).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap(), &(&xv - &cv).scale(2.0));
        assert_eq!(g.get(c).unwrap(), &(&xv - &cv).scale(-2.0));
    }

    #[test]
    fn rejects_bad_usage() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::identity(2));
        assert!(t.record(Primitive::Add, &[x]).is_err());
        assert!(t.record(Primitive::Neg, &[NodeId(9)]).is_err());
        assert!(t.backward(x).is_err());
        let y = t.leaf(Matrix::zeros(3, 3));
        assert!(t.add(x, y).is_err());
    }

    #[test]
    fn unreached_leaf_gets_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::scalar(2.0));
        let unused = t.leaf(Matrix::zeros(2, 3));
        let l = t.sq_err(x, x).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(unused).unwrap(), &Matrix::zeros(2, 3));
        // d/dx (x - x)² = 0 through both edges.
        assert_eq!(g.get(x).unwrap()[(0, 0)], 0.0);
    }

    /// `⟨W, X⟩` via polarization, using only tape primitives.
    fn inner(t: &mut Tape, w: NodeId, x: NodeId) -> NodeId {
        let zero = t.leaf(Matrix::zeros(t.value(x).rows(), t.value(x).cols()));
        let p = t.add(x, w).unwrap();
        let m = t.sub(x, w).unwrap();
        let pp = t.sq_err(p, zero).unwrap();
        let mm = t.sq_err(m, zero).unwrap();
        let d = t.sub(pp, mm).unwrap();
        t.scale(d, 0.25).unwrap()
    }

    #[test]
    fn dare_node_matches_direct_adjoint() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]);
        let b = Matrix::identity(2);
        let q = Matrix::from_diag(&[1.0, 0.0]);
        let r = Matrix::from_diag(&[0.1, 0.3]);
        let w = Matrix::from_rows(&[[0.3, -0.2], [-0.2, 1.1]]);
        let mut t = Tape::new();
        let ids = [a.clone(), b.clone(), q.clone(), r.clone()].map(|m| t.leaf(m));
        let p = t.solve(EquationKind::Dare, &ids).unwrap();
        let wn = t.leaf(w.clone());
        let l = inner(&mut t, wn, p);
        assert!((t.value(l)[(0, 0)] - w.dot(t.value(p))).abs() < 1e-12);
        let g = t.backward(l).unwrap();

        let spec = EquationSpec::dare(a, b, q, r);
        let report = spec.solve().unwrap();
        let direct = adjoint(&spec, &report, &w).unwrap();
        let expect = [direct.a, direct.b.unwrap(), direct.q, direct.r.unwrap()];
        for (id, e) in ids.iter().zip(&expect) {
            let got = g.get(*id).unwrap();
            assert!((got - e).frobenius_norm() <= 1e-12 * e.frobenius_norm().max(1.0));
        }
        assert!((g.get(wn).unwrap() - t.value(p)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn fan_out_accumulates() {
        let xv = Matrix::from_rows(&[[0.5, -1.0], [2.0, 0.25]]);
        let mut t = Tape::new();
        let x = t.leaf(xv.clone());
        let zero = t.leaf(Matrix::zeros(2, 2));
        let once = t.sq_err(x, zero).unwrap();
        let g1 = t.backward(once).unwrap().get(x).unwrap().clone();
        let twice = t.add(x, x).unwrap();
        let l = t.sq_err(twice, zero).unwrap();
        let g2 = t.backward(l).unwrap();
        // (2x)² has gradient 8x = 4 × gradient of x².
        assert_eq!(g2.get(x).unwrap(), &g1.scale(4.0));
        assert_eq!(g1, xv.scale(2.0));
    }

    #[test]
    fn lu_solve_and_mul_match_fd() {
        let av = Matrix::from_rows(&[[3.0, 1.0], [0.5, 2.0]]);
        let bv = Matrix::from_rows(&[[1.0, -1.0, 0.5], [2.0, 0.0, 1.0]]);
        let cv = Matrix::from_rows(&[[0.1, 0.2, 0.3], [-0.4, 0.5, 0.6]]);
        let build = |a: &Matrix, b: &Matrix| {
            let mut t = Tape::new();
            let (an, bn, cn) = (t.leaf(a.clone()), t.leaf(b.clone()), t.leaf(cv.clone()));
            let x = t.lu_solve(an, bn).unwrap();
            let at = t.transpose(an).unwrap();
            let y = t.mul(at, x).unwrap();
            let y = t.neg(y).unwrap();
            let l = t.sq_err(y, cn).unwrap();
            (t, an, bn, l)
        };
        let (t, an, bn, l) = build(&av, &bv);
        let g = t.backward(l).unwrap();
        let h = 1e-6;
        let da = Matrix::from_rows(&[[0.3, -0.7], [0.2, 0.9]]);
        let db = Matrix::from_rows(&[[1.0, 0.0, -1.0], [0.5, 0.5, 0.5]]);
        let f = |s: f64| {
            let (t, _, _, l) = build(&(&av + &da.scale(s)), &(&bv + &db.scale(s)));
            t.value(l)[(0, 0)]
        };
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let ad = g.get(an).unwrap().dot(&da) + g.get(bn).unwrap().dot(&db);
        assert!((fd - ad).abs() <= 1e-7 * ad.abs().max(1.0), "fd {fd} ad {ad}");
    }

    #[test]
    fn backward_is_deterministic() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::from_rows(&[[-2.0, 0.5], [0.1, -1.0]]));
        let q = t.leaf(Matrix::identity(2));
        let p = t.solve(EquationKind::Clyap, &[a, q]).unwrap();
        let z = t.leaf(Matrix::zeros(2, 2));
        let l = t.sq_err(p, z).unwrap();
        assert_eq!(t.backward(l).unwrap(), t.backward(l).unwrap());
    }
}
