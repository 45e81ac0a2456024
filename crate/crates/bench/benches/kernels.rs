use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use virloe::deform::{build_g, conjugate_ln};
use virloe::poly::{q, qr};
use virloe::sle::{self, HalfDisc, JetConfig, RestrictionConfig, SleConfig};
use virloe::wick::{self, Example};
use virloe::{Basepoint, Germ, Poly, Var};

fn exact(c: &mut Criterion) {
    let f = Germ::formal(Basepoint::Origin, 5);
    c.bench_function("build_g formal N=5", |b| b.iter(|| build_g(black_box(&f), 5).unwrap()));
    let r = Germ::from_q(Basepoint::Infinity, 6, &[(-1, qr(1, 2)), (-2, q(-1)), (-4, qr(2, 3))]).unwrap();
    c.bench_function("conjugate_ln rational N=6", |b| b.iter(|| conjugate_ln(black_box(&r), -2, 6).unwrap()));
    let (fa, fb) = Example::TwoSlits.germs(Poly::one(), Poly::var(Var::X), 6);
    let cv = Poly::var(Var::C);
    c.bench_function("z_truncated two slits N=6", |b| b.iter(|| wick::z_truncated(&fa, &fb, &cv, 6).unwrap()));
    c.bench_function("ito check grading 6", |b| b.iter(|| sle::ito_generator_check(6).unwrap()));
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("sle");
    g.sample_size(10);
    let cfg = SleConfig::new(q(2), 1e-3, 1.0, 1000, 1, 3).unwrap();
    let obs = sle::standard_observables(&cfg.kappa, 3).unwrap();
    g.bench_function("martingale test 1000 paths", |b| b.iter(|| sle::martingale_mc_test(&cfg, &obs).unwrap()));
    let rc = RestrictionConfig { n_paths: 50, ..Default::default() };
    g.bench_function("restriction 50 paths", |b| b.iter(|| sle::restriction_experiment(3.0, 1.0, &rc).unwrap()));
    let pc = SleConfig::new(qr(8, 3), 1e-3, 0.5, 1, 1, 2).unwrap();
    let path = sle::simulate_path(&pc, 0);
    let a = HalfDisc { x0: 3.0, r: 1.0 };
    g.bench_function("partition martingale one path", |b| {
        b.iter(|| sle::partition_martingale_eval(&a, 8.0 / 3.0, &path, &JetConfig::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, exact, monte_carlo);
criterion_main!(benches);
