//! Rayon fan-out versus sequential execution on the two batch workloads
//! that dominate wall-clock time: expected-mode accuracy sweeps and sampled
//! Monte Carlo repetitions.
//!
//! Run with `cargo bench -p qsync-core`. Build with
//! `--no-default-features` to confirm the sequential fallback: both sides
//! of each comparison then collapse to the same timings.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qsync_core::batch::Execution;
use qsync_core::sweeps::{accuracy_sweep, seed_sweep};
use qsync_core::syncplan::{delays_from_scenario, Method, SearchPlan};
use qsync_core::{Scenario, TimePs};

fn bench_accuracy_sweep(c: &mut Criterion) {
    let base = Scenario::bb84_default();
    let delays = delays_from_scenario(&base).unwrap();
    let plan = SearchPlan::default();
    let arrivals: Vec<TimePs> = (0..64).map(|k| TimePs::new(k * 156 + 7)).collect();

    let mut group = c.benchmark_group("accuracy_sweep_method1");
    for (name, exec) in [
        ("parallel", Execution::Parallel),
        ("sequential", Execution::Sequential),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                let points = accuracy_sweep(
                    black_box(&base),
                    &plan,
                    &delays,
                    Method::Method1,
                    &arrivals,
                    exec,
                )
                .unwrap();
                black_box(points)
            })
        });
    }
    group.finish();
}

fn bench_seed_sweep(c: &mut Criterion) {
    let base = Scenario::bb84_default();
    let delays = delays_from_scenario(&base).unwrap();
    let plan = SearchPlan::default();
    let seeds: Vec<u64> = (0..64).collect();

    let mut group = c.benchmark_group("seed_sweep_method1_sampled");
    for (name, exec) in [
        ("parallel", Execution::Parallel),
        ("sequential", Execution::Sequential),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                let runs = seed_sweep(
                    black_box(&base),
                    &plan,
                    &delays,
                    Method::Method1,
                    &seeds,
                    exec,
                )
                .unwrap();
                black_box(runs)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_accuracy_sweep, bench_seed_sweep);
criterion_main!(benches);
