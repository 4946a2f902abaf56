use mateq::derivatives::{adjoint, tangent, Tangents};
use mateq::equations::kron_oracle_solve;
use mateq::gradcheck::{random_pbar, random_spec, random_tangents, rel_err};
use mateq::rng::NormalRng;
use mateq::{EquationKind, EquationSpec, Matrix, SolveReport};
use proptest::prelude::*;

fn kind_strategy() -> impl Strategy<Value = EquationKind> {
    prop::sample::select(EquationKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tangent_is_linear(kind in kind_strategy(), n in 1usize..5, seed in any::<u64>(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut rng = NormalRng::new(seed);
        let spec = random_spec(kind, n, n.div_ceil(2), &mut rng);
        let report = spec.solve().unwrap();
        let s1 = random_tangents(&spec, &mut rng);
        let s2 = random_tangents(&spec, &mut rng);
        let combined = tangent(&spec, &report, &s1.combine(alpha, &s2, beta)).unwrap();
        let t1 = tangent(&spec, &report, &s1).unwrap();
        let t2 = tangent(&spec, &report, &s2).unwrap();
        let expect = &t1.scale(alpha) + &t2.scale(beta);
        let scale = t1.frobenius_norm() * alpha.abs() + t2.frobenius_norm() * beta.abs();
        prop_assert!((&combined - &expect).frobenius_norm() <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn riccati_adjoints_symmetric(care in any::<bool>(), n in 1usize..5, seed in any::<u64>()) {
        let kind = if care { EquationKind::Care } else { EquationKind::Dare };
        let mut rng = NormalRng::new(seed);
        let spec = random_spec(kind, n, n.div_ceil(2), &mut rng);
        let report = spec.solve().unwrap();
        prop_assert_eq!(report.p.asymmetry(), 0.0);
        // An unsymmetrized seed is symmetrized on entry.
        let pbar = rng.matrix(n, n);
        let adj = adjoint(&spec, &report, &pbar).unwrap();
        let tol = 1e-10 * adj.multiplier.frobenius_norm().max(1.0);
        prop_assert!(adj.multiplier.asymmetry() <= tol);
        prop_assert_eq!(&adj.q, &adj.multiplier);
        prop_assert!(adj.r.as_ref().unwrap().asymmetry() <= 1e-10 * adj.r.as_ref().unwrap().frobenius_norm().max(1.0));
        let sym = adjoint(&spec, &report, &(&pbar + &pbar.transpose()).scale(0.5)).unwrap();
        prop_assert_eq!(adj, sym);
    }

    #[test]
    fn linear_solvers_match_oracle(kind in prop::sample::select(vec![
        EquationKind::Csylv, EquationKind::Dsylv, EquationKind::Clyap, EquationKind::Dlyap,
    ]), n in 1usize..7, seed in any::<u64>()) {
        let spec = random_spec(kind, n, n, &mut NormalRng::new(seed));
        let p = spec.solve().unwrap().p;
        prop_assert!(rel_err(&p, &kron_oracle_solve(&spec).unwrap()) <= 1e-10);
    }
}

#[test]
fn zero_seeds_give_zero_derivatives() {
    for kind in EquationKind::ALL {
        let spec = random_spec(kind, 3, 2, &mut NormalRng::new(3));
        let report = spec.solve().unwrap();
        let pdot = tangent(&spec, &report, &Tangents::default()).unwrap();
        assert_eq!(pdot.frobenius_norm(), 0.0, "{kind}");
        let adj = adjoint(&spec, &report, &Matrix::zeros(3, 3)).unwrap();
        assert_eq!(adj.a.frobenius_norm(), 0.0, "{kind}");
        assert_eq!(adj.q.frobenius_norm(), 0.0, "{kind}");
    }
}

#[test]
fn bad_pbar_shape_rejected() {
    let spec = random_spec(EquationKind::Dare, 3, 2, &mut NormalRng::new(1));
    let report = spec.solve().unwrap();
    assert!(adjoint(&spec, &report, &Matrix::zeros(2, 2)).is_err());
    let wrong = Tangents::only_b(Matrix::zeros(3, 3));
    assert!(tangent(&spec, &report, &wrong).is_err());
}

#[test]
fn dlyap_degenerate_adjoint() {
    let q = Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]);
    let spec = EquationSpec::dlyap(Matrix::zeros(2, 2), q.clone());
    let report = spec.solve().unwrap();
    assert_eq!(report.p, q);
    let pbar = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
    let adj = adjoint(&spec, &report, &pbar).unwrap();
    assert_eq!(adj.q, pbar);
    assert_eq!(adj.a, Matrix::zeros(2, 2));
}

#[test]
fn spec_and_report_json_round_trip() {
    for kind in EquationKind::ALL {
        let spec = random_spec(kind, 2, 1, &mut NormalRng::new(9));
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains(&format!("\"kind\":\"{kind}\"")));
        let back: EquationSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let report = spec.solve().unwrap();
        let back: SolveReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }
}

#[test]
fn json_rejects_bad_matrices() {
    let bad_len = r#"{"kind":"clyap","A":{"rows":2,"cols":2,"data":[1,2,3]},"Q":{"rows":1,"cols":1,"data":[1]}}"#;
    assert!(serde_json::from_str::<EquationSpec>(bad_len).is_err());
    let missing = r#"{"kind":"care","A":{"rows":1,"cols":1,"data":[1]},"B":{"rows":1,"cols":1,"data":[1]},"Q":{"rows":1,"cols":1,"data":[1]}}"#;
    let err = serde_json::from_str::<EquationSpec>(missing).unwrap_err().to_string();
    assert!(err.contains("`R`"), "{err}");
}

#[test]
fn random_pbar_symmetric_for_riccati() {
    let mut rng = NormalRng::new(4);
    let spec = random_spec(EquationKind::Care, 4, 2, &mut rng);
    assert_eq!(random_pbar(&spec, &mut rng).asymmetry(), 0.0);
}
