//! Parallel vs sequential comparison for the batch-shaped workloads: sweep
//! row execution and Monte-Carlo inclusion checking.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;

use substrat::engine::{detect_convergence, run, StepSchedule};
use substrat::minnorm::SelectionPolicy;
use substrat::parallel::{par_map, seq_map};
use substrat::strata::{shrink_cell, verify_inclusions, LRegularCell, ShrinkParams};
use substrat::{corpus, poly::Field, poly::Polynomial};

fn sweep_rows() -> Vec<(String, StepSchedule, u64)> {
    let mut rows = Vec::new();
    for name in ["abs1d", "quad1d", "maxlin2d", "ridge2d"] {
        for schedule in [
            StepSchedule::Constant { c: 0.1 },
            StepSchedule::harmonic(1.0),
        ] {
            for seed in 0..4u64 {
                rows.push((name.to_string(), schedule.clone(), seed));
            }
        }
    }
    rows
}

fn run_row(row: &(String, StepSchedule, u64)) -> String {
    let e = corpus::get(&row.0).unwrap();
    let t = run(
        &e.function,
        &DVector::from_vec(e.default_x0.clone()),
        &row.1,
        SelectionPolicy::MinNorm,
        2000,
        row.2,
        e.activity_tol,
    )
    .unwrap();
    format!("{:?}", detect_convergence(&t, 1e-6))
}

fn bench_sweep(c: &mut Criterion) {
    let rows = sweep_rows();
    let mut group = c.benchmark_group("sweep_batch");
    group.sample_size(10);
    group.bench_with_input(
        BenchmarkId::new("parallel", rows.len()),
        &rows,
        |b, rows| b.iter(|| par_map(rows.clone(), |r| run_row(&r))),
    );
    group.bench_with_input(
        BenchmarkId::new("sequential", rows.len()),
        &rows,
        |b, rows| b.iter(|| seq_map(rows.clone(), |r| run_row(&r))),
    );
    group.finish();
}

fn bench_inclusions(c: &mut Criterion) {
    let triangle = LRegularCell::band(
        LRegularCell::interval(0.0, 1.0),
        Field::constant(1, 0.0),
        Field::Poly(Polynomial::coord(1, 0)),
        1.0,
    );
    let shrunk = shrink_cell(&triangle, 0.1, &ShrinkParams { c: 1.0, kappa: 1.0 }).unwrap();
    let mut group = c.benchmark_group("inclusion_check");
    group.sample_size(10);
    // verify_inclusions routes its sample evaluation through par_map, so the
    // two bench targets differ only in the crate feature default
    group.bench_function("montecarlo_10k", |b| {
        b.iter(|| verify_inclusions(&shrunk, 10_000, 42))
    });
    group.finish();
}

criterion_group!(benches, bench_sweep, bench_inclusions);
criterion_main!(benches);
