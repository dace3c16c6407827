use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qpredict_core::*;
use std::hint::black_box;

fn state(n: usize) -> WaveFunction2 {
    let params = GaussianParams::new(0.0, 0.0, 1.0, 0.5).unwrap();
    let (g1, g2) = params.grids_with(8.0, n);
    gaussian_wavefunction(params, g1, g2).unwrap()
}

fn marginal(c: &mut Criterion) {
    let mut group = c.benchmark_group("marginal_total");
    group.sample_size(10);
    for n in [128, 256, 512] {
        let rho = density_of(&state(n));
        group.bench_with_input(BenchmarkId::from_parameter(n), &rho, |b, rho| b.iter(|| marginal_total(black_box(rho))));
    }
    group.finish();
}

fn conditional(c: &mut Criterion) {
    let rho = density_of(&state(512));
    let cond = Conditioner::new(&rho);
    c.bench_function("conditional_expectation/512", |b| {
        b.iter(|| cond.expectation(black_box(&Observable1::Identity), black_box(1.0)).unwrap())
    });
}

fn window(c: &mut Criterion) {
    let psi = state(512);
    let w = MeasurementWindow::new(1.0, 0.25).unwrap();
    c.bench_function("apply_window/512", |b| b.iter(|| apply_window(black_box(&psi), &w).unwrap()));
}

fn position(c: &mut Criterion) {
    let mut group = c.benchmark_group("to_position");
    group.sample_size(10);
    for n in [256, 512] {
        let psi = state(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &psi, |b, psi| b.iter(|| to_position(black_box(psi)).unwrap()));
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let params = GaussianParams::new(0.0, 0.0, 1.0, 0.5).unwrap();
    let rho = density_of(&state(256));
    let mut group = c.benchmark_group("sample_100k");
    group.sample_size(10);
    group.bench_function("gaussian", |b| b.iter(|| sample(SamplingSource::Gaussian(params), 100_000, black_box(1)).unwrap()));
    group.bench_function("grid_256", |b| b.iter(|| sample(SamplingSource::Grid(&rho), 100_000, black_box(1)).unwrap()));
    group.finish();
}

criterion_group!(benches, marginal, conditional, window, position, sampling);
criterion_main!(benches);
