use std::hint::black_box;

use criterion::{Criterion, criterion_group, criterion_main};
use nalgebra::DVector;
use psm_core::datagen::{self, Shift};
use psm_core::fitting::{self, FitConfig};
use psm_core::geometry::{self, Tangent};
use psm_core::stats::{self, KernelSpec};

fn geometry_maps(c: &mut Criterion) {
    let x = geometry::project_to_sphere(&DVector::from_vec(vec![0.3, -0.2, 0.5, 0.8])).unwrap();
    let v = geometry::tangent_project(&x, &DVector::from_vec(vec![0.4, 0.1, -0.7, 0.2])).unwrap();
    let v = Tangent::new(x.clone(), v.into_vec()).unwrap();
    let y = geometry::exp_map(&x, &v).unwrap();
    c.bench_function("exp_map S^3", |b| b.iter(|| geometry::exp_map(black_box(&x), black_box(&v)).unwrap()));
    c.bench_function("log_map S^3", |b| b.iter(|| geometry::log_map(black_box(&x), black_box(&y)).unwrap()));
}

fn s_curve(c: &mut Criterion) {
    let d = datagen::gen_s_curve(200, 7, 1.0 / 32.0, Shift::default()).unwrap();
    let a = stats::frechet_mean(&d.points, 1e-12, 1000).unwrap();
    c.bench_function("frechet_mean s_curve n=200", |b| {
        b.iter(|| stats::frechet_mean(black_box(&d.points), 1e-12, 1000).unwrap())
    });
    c.bench_function("local_covariance n=200", |b| {
        b.iter(|| stats::local_covariance(black_box(&a), &d.points, &KernelSpec::default()).unwrap())
    });
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("s_curve D=180", |b| {
        b.iter(|| fitting::fit_submanifold(black_box(&d.points), &a, &FitConfig::default()).unwrap())
    });
    let sub = fitting::fit_submanifold(&d.points, &a, &FitConfig::default()).unwrap();
    group.bench_function("variation_score D=180", |b| {
        b.iter(|| fitting::variation_score(black_box(&sub), &d.points).unwrap())
    });
    group.finish();
}

criterion_group!(benches, geometry_maps, s_curve);
criterion_main!(benches);
