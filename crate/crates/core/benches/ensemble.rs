use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;

use randsplit::ensemble::run_ensemble;
use randsplit::{ClassificationProblem, ExecPolicy, LinearMode, Regime, SparseProblem, SwitchConfig, TimeGrid};

fn sparse(c: &mut Criterion) {
    let p = SparseProblem::scalar(1.0, 4.0).unwrap();
    let x0 = DVector::zeros(1);
    let switch = SwitchConfig::new(25.0, Regime::Linear, 1).unwrap();
    let grid = TimeGrid::new(vec![20.0]).unwrap();
    let mut g = c.benchmark_group("sparse_1d_2000_paths");
    for policy in [ExecPolicy::Sequential, ExecPolicy::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{policy:?}")), &policy, |b, &policy| {
            b.iter(|| run_ensemble(&p, &x0, &switch, 2000, &grid, policy).unwrap())
        });
    }
    g.finish();
}

fn classification(c: &mut Criterion) {
    let p = ClassificationProblem::class1d_small(1e-2).unwrap();
    let flow = p.flow(LinearMode::Exact, None).unwrap();
    let x0 = DVector::zeros(p.dim());
    let switch = SwitchConfig::new(10.0, Regime::Linear, 1).unwrap();
    let grid = TimeGrid::uniform(16.0, 17).unwrap();
    let mut g = c.benchmark_group("class1d_small_64_paths");
    g.sample_size(20);
    for policy in [ExecPolicy::Sequential, ExecPolicy::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{policy:?}")), &policy, |b, &policy| {
            b.iter(|| run_ensemble(&flow, &x0, &switch, 64, &grid, policy).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sparse, classification);
criterion_main!(benches);
