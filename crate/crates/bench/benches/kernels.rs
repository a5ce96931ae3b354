use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use subdiff_core::kernel::{k_weights, l_weights, relaxation_family, verify_pair};
use subdiff_core::special::{exp_integral_e1, gamma, mittag_leffler_neg};
use subdiff_core::{KernelPair, TimeGrid};

fn special(c: &mut Criterion) {
    c.bench_function("gamma", |b| b.iter(|| gamma(black_box(3.7))));
    c.bench_function("e1", |b| b.iter(|| exp_integral_e1(black_box(2.5))));
    let mut g = c.benchmark_group("mittag_leffler_neg");
    for x in [0.5, 3.0, 50.0] {
        g.bench_function(format!("x={x}"), |b| b.iter(|| mittag_leffler_neg(0.5, black_box(x))));
    }
    g.finish();
}

fn weights(c: &mut Criterion) {
    let grid = TimeGrid::with_horizon(1e-3, 1.0).unwrap();
    let pairs = [
        ("fractional", KernelPair::fractional(0.5).unwrap()),
        ("fractional_exp", KernelPair::fractional_exp(0.5, 1.0).unwrap()),
        ("distributed", KernelPair::distributed_order().unwrap()),
    ];
    let mut g = c.benchmark_group("weights_n1000");
    for (name, pair) in &pairs {
        g.bench_function(format!("l/{name}"), |b| b.iter(|| l_weights(pair, &grid).unwrap()));
        g.bench_function(format!("k_dual/{name}"), |b| b.iter(|| k_weights(pair, &grid).unwrap()));
    }
    g.finish();
}

fn relaxation(c: &mut Criterion) {
    let pair = KernelPair::fractional(0.5).unwrap();
    let grid = TimeGrid::with_horizon(1e-3, 1.0).unwrap();
    c.bench_function("relaxation_n1000", |b| {
        b.iter(|| relaxation_family(&pair, 1.0, &grid, Default::default()).unwrap())
    });
    let coarse = TimeGrid::with_horizon(1e-3, 1.0).unwrap();
    c.bench_function("verify_pair_n1000", |b| b.iter(|| verify_pair(&pair, &coarse, 0.1).unwrap()));
}

criterion_group!(benches, special, weights, relaxation);
criterion_main!(benches);
