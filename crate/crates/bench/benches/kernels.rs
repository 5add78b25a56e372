use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use roughpde::measures::{evaluate_xi, sample_reference, GaussianReference, PotentialPair, XiScheme};
use roughpde::rng::StreamId;
use roughpde::rough::{rough_integral, Grid};
use roughpde::semigroup::SemigroupSpec;
use roughpde::solver::{rough_heat_convolution, solve_fixed_point, ConvolutionKernel, SolverOptions};
use roughpde_bench::{default_problem, gaussian_lift, sine_integrand};
use std::hint::black_box;

fn lifts(c: &mut Criterion) {
    let mut group = c.benchmark_group("lift_field");
    for m in [256usize, 1024, 4096] {
        let (sf, _) = gaussian_lift(m, 2, 1);
        let grid = Grid::periodic(m).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| roughpde::field::lift_field(black_box(&sf), &grid).unwrap())
        });
    }
    group.finish();
}

fn integrals(c: &mut Criterion) {
    let mut group = c.benchmark_group("rough_integral");
    for m in [256usize, 1024, 4096] {
        let (_, rp) = gaussian_lift(m, 1, 2);
        let cp = sine_integrand(&rp);
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| rough_integral(black_box(&cp), &rp, 0, m).unwrap())
        });
    }
    group.finish();
}

fn convolutions(c: &mut Criterion) {
    let mut group = c.benchmark_group("rough_heat_convolution");
    let semigroup = SemigroupSpec::damped();
    for m in [256usize, 1024, 4096] {
        let (_, rp) = gaussian_lift(m, 1, 3);
        let cp = sine_integrand(&rp);
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| {
                rough_heat_convolution(ConvolutionKernel::HeatDerivative, 1e-3, black_box(&cp), &rp, &semigroup)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn xi(c: &mut Criterion) {
    let pair = PotentialPair::default_pair();
    let m = 1024;
    let reference = GaussianReference::for_grid(m, 2, 0.0).unwrap();
    let w = sample_reference(&reference, m, &mut StreamId::new(4, 0).rng()).unwrap();
    c.bench_function("evaluate_xi/1024", |b| {
        b.iter(|| evaluate_xi(black_box(&w), m, &pair, XiScheme::Midpoint))
    });
}

fn solves(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_fixed_point");
    group.sample_size(10);
    for m in [64usize, 128] {
        let (problem, noise) = default_problem(m, 64, 1.0 / 1024.0, 5);
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| solve_fixed_point(&problem, &noise, 1.0 / 16.0, &SolverOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, lifts, integrals, convolutions, xi, solves);
criterion_main!(benches);
