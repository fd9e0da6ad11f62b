use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use forecast_lab_core::model::{CostModel, ModelParams, Setting};
use forecast_lab_core::montecarlo::{simulate_mse, SimConfig};
use forecast_lab_core::solver::{closed_form_linear_cost, solve, DEFAULT_TOL};
use forecast_lab_core::statics::{sweep, SweepSpec, SweptParameter};

fn solver(c: &mut Criterion) {
    let params = ModelParams::simple(1.0, 1.0, -0.5).unwrap();
    let quadratic = CostModel::quadratic(1.0).unwrap();
    let linear = CostModel::linear(0.1).unwrap();
    c.bench_function("solve/quadratic", |b| {
        b.iter(|| solve(Setting::Opaque, black_box(-0.5), &params, &quadratic, DEFAULT_TOL).unwrap())
    });
    c.bench_function("solve/linear", |b| {
        b.iter(|| solve(Setting::Opaque, black_box(-0.5), &params, &linear, DEFAULT_TOL).unwrap())
    });
    c.bench_function("closed_form/linear", |b| {
        b.iter(|| closed_form_linear_cost(Setting::Opaque, black_box(-0.5), &params, 0.1).unwrap())
    });
}

fn sweeps(c: &mut Criterion) {
    let spec = SweepSpec {
        parameter: SweptParameter::Mu,
        grid: (0..201).map(|i| -2.0 + 0.05 * i as f64).collect(),
        params: ModelParams::simple(1.0, 1.0, 1.0).unwrap(),
        cost: CostModel::quadratic(1.0).unwrap(),
        mu: 1.0,
        settings: Setting::ALL.to_vec(),
        tol: DEFAULT_TOL,
    };
    c.bench_function("sweep/mu_201x3", |b| b.iter(|| sweep(black_box(&spec)).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let config = SimConfig::new(ModelParams::simple(1.0, 1.0, 1.0).unwrap(), Setting::Opaque, 0.5, 100_000, 1);
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("opaque_1e5", |b| b.iter(|| simulate_mse(black_box(&config)).unwrap()));
    group.finish();
}

criterion_group!(benches, solver, sweeps, simulation);
criterion_main!(benches);
