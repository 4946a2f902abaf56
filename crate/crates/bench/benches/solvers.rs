use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use mateq::derivatives::{adjoint, tangent};
use mateq::equations::kron_oracle_solve;
use mateq::gradcheck::{random_pbar, random_spec, random_tangents};
use mateq::inverse_lqr::{example_system, generate_dataset, loss_grad};
use mateq::rng::NormalRng;
use mateq::{EquationKind, Matrix};

const SIZES: [usize; 4] = [2, 4, 8, 16];

fn solvers(c: &mut Criterion) {
    for kind in EquationKind::ALL {
        let mut group = c.benchmark_group(format!("solve/{kind}"));
        for n in SIZES {
            let spec = random_spec(kind, n, n.div_ceil(2), &mut NormalRng::new(n as u64));
            group.bench_with_input(BenchmarkId::from_parameter(n), &spec, |b, s| b.iter(|| s.solve().unwrap()));
        }
        group.finish();
    }
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle/csylv");
    for n in SIZES {
        let spec = random_spec(EquationKind::Csylv, n, n, &mut NormalRng::new(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &spec, |b, s| {
            b.iter(|| kron_oracle_solve(s).unwrap())
        });
    }
    group.finish();
}

fn derivatives(c: &mut Criterion) {
    for kind in [EquationKind::Clyap, EquationKind::Dare] {
        let mut group = c.benchmark_group(format!("derivatives/{kind}"));
        for n in SIZES {
            let mut rng = NormalRng::new(n as u64);
            let spec = random_spec(kind, n, n, &mut rng);
            let report = spec.solve().unwrap();
            let seeds = random_tangents(&spec, &mut rng);
            let pbar = random_pbar(&spec, &mut rng);
            group.bench_function(BenchmarkId::new("tangent", n), |b| {
                b.iter(|| tangent(&spec, &report, black_box(&seeds)).unwrap())
            });
            group.bench_function(BenchmarkId::new("adjoint", n), |b| {
                b.iter(|| adjoint(&spec, &report, black_box(&pbar)).unwrap())
            });
        }
        group.finish();
    }
}

fn inverse_lqr(c: &mut Criterion) {
    let spec = example_system();
    let data = generate_dataset(&spec, 30, 30, 0).unwrap();
    let m = Matrix::identity(2);
    c.bench_function("inverse_lqr/loss_grad", |b| b.iter(|| loss_grad(black_box(&m), &data, &spec).unwrap()));
}

criterion_group!(benches, solvers, oracle, derivatives, inverse_lqr);
criterion_main!(benches);
