use mateq::inverse_lqr::{example_system, fit, generate_dataset, loss, loss_grad, LqrSpec};
use mateq::lbfgs::{LbfgsOptions, LbfgsStatus};
use mateq::rng::NormalRng;
use mateq::Matrix;

fn fd_directional(m: &Matrix, dir: &Matrix, f: impl Fn(&Matrix) -> f64) -> f64 {
    let h = 1e-5 * m.frobenius_norm().max(1.0) / dir.frobenius_norm();
    (f(&(m + &dir.scale(h))) - f(&(m - &dir.scale(h)))) / (2.0 * h)
}

#[test]
fn gradient_matches_fd_on_three_state_system() {
    let spec = LqrSpec::new(
        Matrix::from_rows(&[[1.0, 0.2, 0.0], [0.0, 0.9, 0.3], [0.1, 0.0, 1.05]]),
        Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.5], [0.3, 1.0]]),
        Matrix::from_diag(&[1.0, 0.5, 2.0]),
        Matrix::from_rows(&[[1.0, 0.2], [0.2, 0.5]]),
    )
    .unwrap();
    let data = generate_dataset(&spec, 6, 12, 11).unwrap();
    let mut rng = NormalRng::new(5);
    for _ in 0..3 {
        let m = &Matrix::identity(3) + &rng.matrix(3, 3).scale(0.4);
        let dir = rng.matrix(3, 3);
        let (_, g) = loss_grad(&m, &data, &spec).unwrap();
        let fd = fd_directional(&m, &dir, |x| loss(&(x * &x.transpose()), &data, &spec).unwrap());
        let ad = g.dot(&dir);
        assert!((fd - ad).abs() <= 1e-6 * fd.abs().max(ad.abs()), "fd {fd} ad {ad}");
    }
}

#[test]
fn example_recovery_other_seed() {
    let spec = example_system();
    let data = generate_dataset(&spec, 30, 30, 3).unwrap();
    let res = fit(&spec, &data, &LbfgsOptions::default()).unwrap();
    assert!(res.loss <= 1e-8);
    assert!((&res.q_hat - &spec.q).frobenius_norm() <= 5e-2);
    let iters: Vec<usize> = res.trace.rows.iter().map(|r| r.iter).collect();
    assert_eq!(iters, (0..=res.iterations).collect::<Vec<_>>());
    assert!(res.trace.rows.iter().all(|r| r.loss.is_finite() && r.loss >= 0.0));
}

#[test]
fn optimizer_stays_at_truth() {
    let spec = example_system();
    let data = generate_dataset(&spec, 10, 10, 2).unwrap();
    // Q = diag(1, 0) = M Mᵀ with M = diag(1, 0).
    let m = Matrix::from_diag(&[1.0, 0.0]);
    let (l, g) = loss_grad(&m, &data, &spec).unwrap();
    assert!(l <= 1e-28 && g.frobenius_norm() <= 1e-8);
    let res = mateq::lbfgs::minimize(|x| loss_grad(x, &data, &spec), m.clone(), &LbfgsOptions::default(), |_| {}).unwrap();
    assert_eq!(res.status, LbfgsStatus::GradientTolerance);
    assert_eq!(res.x, m);
}
