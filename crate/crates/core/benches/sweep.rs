use criterion::{criterion_group, criterion_main, Criterion};
use clustersim::experiment::run_sweep_with;
use clustersim::{Execution, ParamKey, SimParams, SweepAxis, SweepSpec};

fn desk_params() -> SimParams {
    let d = SimParams::default();
    SimParams {
        job_size: 256,
        warm_standbys: 16,
        working_pool_size: 272,
        job_length: 10.0 * 1440.0,
        random_failure_rate: d.random_failure_rate * 20.0,
        ..d
    }
}

fn bench_sweep(c: &mut Criterion) {
    let base = desk_params();
    let spec = SweepSpec::one_way(
        "bench",
        SweepAxis::new(ParamKey::RecoveryTime, vec![10.0, 20.0, 30.0]),
        8,
        0,
    );
    let mut group = c.benchmark_group("sweep_3x8");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_sweep_with(&spec, &base, Execution::Sequential).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| run_sweep_with(&spec, &base, Execution::Parallel).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
