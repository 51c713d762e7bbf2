use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fuelgames::*;

fn thresholds(c: &mut Criterion) {
    let q = CostSpec::quadratic();
    let xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
    let hs: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let table = CostSpec::tabulated(&xs, &hs).unwrap();

    c.bench_function("solve_c_n quadratic N=10", |b| b.iter(|| solve_c_n(black_box(10), 2.0, &q).unwrap()));
    c.bench_function("solve_c_n tabulated N=10", |b| {
        b.iter(|| solve_c_n(black_box(10), 2.0, &table).unwrap())
    });
    c.bench_function("convergence_tables 2..100 x 3", |b| {
        let ns: Vec<usize> = (2..=100).collect();
        b.iter(|| convergence_tables(&ns, &[0.2, 2.0, 20.0], &q).unwrap())
    });
}

fn resolvent(c: &mut Criterion) {
    let r = Resolvent::new(5, 2.0, CostSpec::quadratic()).unwrap();
    let xs: Vec<f64> = (0..64).map(|i| (i as f64 - 32.0) * 0.3).collect();
    let h = |x: f64| (x.cosh()).ln();
    let custom = CostSpec::custom(h, |x: f64| x.tanh(), |x: f64| 1.0 / x.cosh().powi(2), 1.0, 1.0).unwrap();
    let rc = Resolvent::new(5, 2.0, custom).unwrap();
    c.bench_function("p_n closed form x64", |b| {
        b.iter(|| xs.iter().map(|&x| p_n(x, &r).unwrap()).sum::<f64>())
    });
    c.bench_function("p_n quadrature x64", |b| {
        b.iter(|| xs.iter().map(|&x| p_n(x, &rc).unwrap()).sum::<f64>())
    });
}

fn game(c: &mut Criterion) {
    let c_n = solve_c_n(6, 2.0, &CostSpec::quadratic()).unwrap();
    let x = StateVector::new(vec![9.0, -7.0, 3.0, 0.5, -12.0, 4.0]);
    c.bench_function("algorithm1 N=6", |b| b.iter(|| algorithm1(black_box(&x), c_n).unwrap()));
    let t = Thresholds::solve(6, 2.0, &CostSpec::quadratic()).unwrap();
    let req =
        NeValueRequest { player: 1, x: x.clone(), params: GameParams::new(6, 2.0).unwrap(), thresholds: t };
    c.bench_function("value_i N=6", |b| b.iter(|| value_i(black_box(&req)).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("monte carlo");
    g.sample_size(10);
    let q = CostSpec::quadratic();
    let params = GameParams::new(3, 2.0).unwrap();
    let c_n = solve_c_n(3, 2.0, &q).unwrap();
    let x0 = StateVector::new(vec![0.0, 0.0, 0.0]);
    let cfg = SimConfig::new(1e-3, 2.0, 256, 7, 2.0);
    g.bench_function("mc_payoff N=3 256 paths T=2", |b| {
        b.iter(|| mc_payoff(0, &x0, &params, &q, c_n, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, thresholds, resolvent, game, simulation);
criterion_main!(benches);
