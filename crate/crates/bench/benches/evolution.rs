use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use subdiff_bench::{sine_field, unit_operator};
use subdiff_core::evolution::{run_ode, run_pde};
use subdiff_core::{KernelPair, Nonlinearity, Problem, TimeGrid};

fn elliptic(c: &mut Criterion) {
    let op = unit_operator(199);
    let rhs = sine_field(&op);
    c.bench_function("solve_shifted_n199", |b| b.iter(|| op.solve_shifted(black_box(10.0), &rhs).unwrap()));
    c.bench_function("principal_eigenpair_n199", |b| {
        b.iter(|| {
            let fresh = unit_operator(199);
            fresh.principal_eigenpair().map(|(l, _)| l).unwrap()
        })
    });
}

fn stepping(c: &mut Criterion) {
    let pair = KernelPair::fractional(0.5).unwrap();
    let grid = TimeGrid::with_horizon(1e-3, 0.2).unwrap();
    let ode = Problem::ode(pair.clone(), grid.clone(), Nonlinearity::Linear { c: -1.0 }, 1.0);
    c.bench_function("ode_linear_n200", |b| b.iter(|| run_ode(&ode).unwrap()));

    let op = unit_operator(99);
    let u0 = sine_field(&op);
    let pde = Problem::pde(pair, grid, op, Nonlinearity::Nsy, u0);
    let mut g = c.benchmark_group("pde");
    g.sample_size(10);
    g.bench_function("nsy_n99_steps200", |b| b.iter(|| run_pde(&pde).unwrap()));
    g.finish();
}

criterion_group!(benches, elliptic, stepping);
criterion_main!(benches);
