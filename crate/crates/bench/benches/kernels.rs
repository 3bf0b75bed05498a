use criterion::{black_box, criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

use surfdyn::arith::expr::to_ratfunc;
use surfdyn::green::{self, TateLimitConfig};
use surfdyn::heights::{self, HeightConfig};
use surfdyn::maps::{henon, monomial};
use surfdyn::periodic::{self, PeriodicConfig};

fn tate(c: &mut Criterion) {
    let cfg = TateLimitConfig::default();
    let f = henon(&[(&[-1, 0, 1], 1)]).to_numeric();
    let escaping = [Complex64::new(2.5, 0.3), Complex64::new(-1.0, 0.7)];
    let bounded = [Complex64::new(0.1, 0.0), Complex64::new(0.2, 0.0)];
    c.bench_function("green_plus escaping", |b| b.iter(|| green::green_plus_arch(&f, black_box(&escaping), &cfg)));
    c.bench_function("green_plus bounded", |b| b.iter(|| green::green_plus_arch(&f, black_box(&bounded), &cfg)));
    let a = monomial([[2, 1], [1, 1]]).unwrap().to_numeric();
    let p = [Complex64::new(3.0, 1.0), Complex64::new(0.2, -0.4)];
    c.bench_function("green_plus monomial", |b| b.iter(|| green::green_plus_arch(&a, black_box(&p), &cfg)));
}

fn grid(c: &mut Criterion) {
    let auto = henon(&[(&[0, 0, 1], 1)]);
    let f = auto.to_numeric();
    let norm = green::normalization(&auto);
    let cfg = TateLimitConfig::default();
    c.bench_function("green_grid 64x64", |b| {
        b.iter(|| green::green_grid(&f, norm, (-3.0, 3.0), (-3.0, 3.0), (64, 64), &cfg))
    });
}

fn periodic_points(c: &mut Criterion) {
    let f = henon(&[(&[-6, 0, 1], 1)]);
    let cfg = PeriodicConfig::default();
    let mut g = c.benchmark_group("periodic");
    g.sample_size(10);
    for n in [2, 4] {
        g.bench_function(format!("Per_{n}"), |b| b.iter(|| periodic::numeric_periodic(&f, n, &cfg)));
    }
    g.finish();
}

fn moriwaki(c: &mut Criterion) {
    let fam = heights::example_family();
    let pt = [to_ratfunc("t").unwrap(), to_ratfunc("1").unwrap()];
    let cfg = HeightConfig::default();
    let mut g = c.benchmark_group("moriwaki");
    g.sample_size(10);
    g.bench_function("(t,1) 256/64", |b| b.iter(|| heights::moriwaki_height(&fam, &pt, 256, 64, &cfg)));
    g.finish();
}

criterion_group!(benches, tate, grid, periodic_points, moriwaki);
criterion_main!(benches);
