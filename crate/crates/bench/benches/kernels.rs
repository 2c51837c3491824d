use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use saarb_core::bounds::default_t_grid;
use saarb_core::dist::sample;
use saarb_core::entropy::{j_hoelder, j_pl};
use saarb_core::problems::{bounded_product, quadratic};
use saarb_core::risk::{apply, avar_closed_form, oce_bracket, oce_of};
use saarb_core::saa::solve_empirical;
use saarb_core::{
    BoundContext, EmpiricalDistribution, GridSpec, PhiFamily, RemainderMode, RiskFunctional, SemideviationParams,
};

fn losses(n: usize) -> Vec<f64> {
    let b = quadratic(RiskFunctional::Expectation).unwrap();
    sample(&b.problem.source, n, 1).unwrap().rows().map(|r| r[0]).collect()
}

fn risk_kernels(c: &mut Criterion) {
    let phi = PhiFamily::avar(0.9, 1.5).unwrap();
    let mut g = c.benchmark_group("risk");
    for n in [1_000, 10_000] {
        let values = losses(n);
        let ed = EmpiricalDistribution::new(values.clone()).unwrap();
        let bracket = oce_bracket(&values, &phi).unwrap();
        g.bench_with_input(BenchmarkId::new("avar_closed_form", n), &ed, |b, ed| {
            b.iter(|| avar_closed_form(black_box(ed), 0.9).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("oce_avar", n), &values, |b, v| {
            b.iter(|| oce_of(black_box(v), &phi, bracket).unwrap())
        });
        let semi = RiskFunctional::Semideviation(SemideviationParams::new(2.0, 0.5).unwrap());
        g.bench_with_input(BenchmarkId::new("semideviation", n), &ed, |b, ed| {
            b.iter(|| apply(&semi, black_box(ed)).unwrap())
        });
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let b = quadratic(RiskFunctional::Divergence(PhiFamily::avar(0.5, 1.5).unwrap())).unwrap();
    let s = sample(&b.problem.source, 1000, 7).unwrap();
    let grid = GridSpec { points_per_dim: 33, refinements: 2 };
    c.bench_function("solve_empirical/quadratic_avar_n1000", |bn| {
        bn.iter(|| solve_empirical(&b.problem, black_box(&s), grid).unwrap())
    });
}

fn bound_kernels(c: &mut Criterion) {
    c.bench_function("entropy/j_hoelder", |b| b.iter(|| j_hoelder(3, black_box(1.0), 0.25).unwrap()));
    c.bench_function("entropy/j_pl", |b| b.iter(|| j_pl(2, black_box(&[2, 3]), 0.5).unwrap()));

    let bp = bounded_product(RiskFunctional::Divergence(PhiFamily::avar(0.5, 1.5).unwrap())).unwrap();
    let ctx =
        BoundContext::build(&bp.problem.risk, &bp.envelope, &bp.problem.source, &bp.entropy, RemainderMode::Auto, 1.0)
            .unwrap();
    let t_grid = default_t_grid();
    c.bench_function("bounds/best_over_t_avar", |b| {
        b.iter(|| ctx.best_over_t(black_box(3000), 1000.0, &t_grid).unwrap())
    });
}

criterion_group!(benches, risk_kernels, solver, bound_kernels);
criterion_main!(benches);
