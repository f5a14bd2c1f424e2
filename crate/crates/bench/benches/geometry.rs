use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mfb_core::curvature;
use mfb_core::harness::{random_fluid_fields, resolve_scenario};
use mfb_core::kaluza::{
    average_metric, fiber_spectrum, geodesic_integrate, recombination_residual, PotentialField, SpectrumFiber,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn curvature_bench(c: &mut Criterion) {
    let s = resolve_scenario("warped_kk", 0).unwrap();
    let x = s.samples[0].clone();
    c.bench_function("curvature/warped_kk", |b| {
        b.iter(|| curvature(&s.metric, black_box(&x)).unwrap())
    });
    let s8 = resolve_scenario("product_r13_s1_s3", 0).unwrap();
    let x8 = s8.samples[0].clone();
    c.bench_function("curvature/product_8d", |b| {
        b.iter(|| curvature(&s8.metric, black_box(&x8)).unwrap())
    });
}

fn recombination_bench(c: &mut Criterion) {
    let s = resolve_scenario("flat_kk", 0).unwrap();
    let bundle = s.bundle.as_ref().unwrap();
    let y = PotentialField::new(bundle, &s.metric);
    let fields = random_fluid_fields(&mut ChaCha8Rng::seed_from_u64(1), s.dim(), true);
    let x = s.samples[0].clone();
    c.bench_function("recombination/flat_kk", |b| {
        b.iter(|| recombination_residual(&s.metric, &y, &fields, black_box(&x)).unwrap())
    });
}

fn flow_bench(c: &mut Criterion) {
    let s = resolve_scenario("u_periodic", 0).unwrap();
    let bundle = s.bundle.as_ref().unwrap();
    let x = s.samples[0].clone();
    c.bench_function("average/u_periodic_64", |b| {
        b.iter(|| average_metric(bundle, &s.metric, black_box(&x), 64).unwrap())
    });
    c.bench_function("spectrum/s1_256", |b| {
        b.iter(|| fiber_spectrum(bundle, &s.metric, black_box(&x), SpectrumFiber::S1, 256).unwrap())
    });

    let k = resolve_scenario("flat_kk", 0).unwrap();
    let x0 = vec![0.0; 5];
    let v0 = vec![1.0, 0.0, 0.0, 0.0, 0.5];
    c.bench_function("geodesic/flat_kk_1000_steps", |b| {
        b.iter(|| geodesic_integrate(&k.manifold, &k.metric, &k.killing, &x0, black_box(&v0), 1.0, 1e-3).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = curvature_bench, recombination_bench, flow_bench
}
criterion_main!(benches);
