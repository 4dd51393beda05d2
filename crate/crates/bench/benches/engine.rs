use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use qgfbsde_core::rng::streams;
use qgfbsde_core::{
    build_grid, draw_increments, price_indifference, regress, simulate_index, GeometricParams, MarketModel,
    PayoffSpec, RegressionBasis, SeedSpec, SolverConfig,
};

fn increments(c: &mut Criterion) {
    let grid = build_grid(1.0, 100).unwrap();
    c.bench_function("draw_increments 10k x 100", |b| {
        b.iter(|| draw_increments(&grid, black_box(10_000), SeedSpec::new(1, streams::INDEX)).unwrap())
    });
}

fn regression(c: &mut Criterion) {
    let model = MarketModel::geometric(&GeometricParams::default());
    let grid = build_grid(1.0, 10).unwrap();
    let batch = simulate_index(&model, &grid, 20_000, SeedSpec::new(1, streams::INDEX)).unwrap();
    let payoff = PayoffSpec::put(200.0).unwrap();
    let basis = RegressionBasis::standard(&payoff);
    let x = batch.state_column(5).to_vec();
    let y: Vec<f64> = batch.state_column(10).iter().map(|&r| payoff.eval(r)).collect();
    c.bench_function("regress 20k, 6 columns", |b| b.iter(|| regress(black_box(&y), &x, &basis).unwrap()));
}

fn pricing(c: &mut Criterion) {
    let model = MarketModel::geometric(&GeometricParams::default());
    let grid = build_grid(1.0, 20).unwrap();
    let payoff = PayoffSpec::put(200.0).unwrap();
    let cfg = SolverConfig::new(RegressionBasis::standard(&payoff));
    let mut group = c.benchmark_group("pricing");
    group.sample_size(10);
    group.bench_function("indifference 5k x 20", |b| {
        b.iter(|| price_indifference(&model, &payoff, &grid, 5_000, SeedSpec::new(1, streams::INDEX), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, increments, regression, pricing);
criterion_main!(benches);
