use convexnet::expr::Expr;
use convexnet::geometry::ConvexBody;
use convexnet::net::SublinearNet;
use convexnet::pde::{solve_galerkin, solve_torsion_mfs, GalerkinConfig, MfsConfig};
use convexnet::problems::{ellipsoid_curvature, mahler_volume, minkowski_loss};
use convexnet::quadrature::{ball_rule, sphere_rule};
use convexnet::sublinear::Sublinear;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn net(d: usize, m: usize) -> SublinearNet {
    let mut net = SublinearNet::random(d, m, &mut ChaCha8Rng::seed_from_u64(7));
    for w in net.w.iter_mut() {
        *w *= 0.5;
    }
    net.normalize_scale(&sphere_rule(d, 256).unwrap()).unwrap()
}

fn evaluation(c: &mut Criterion) {
    let mut g = c.benchmark_group("net");
    for d in [2, 3] {
        let p = net(d, 128);
        let x: Vec<f64> = (0..d).map(|i| 0.3 + i as f64).collect();
        g.bench_with_input(BenchmarkId::new("value", d), &x, |b, x| b.iter(|| p.value(black_box(x))));
        for order in [1, 3] {
            g.bench_with_input(BenchmarkId::new(format!("taylor{order}"), d), &x, |b, x| {
                b.iter(|| p.taylor(black_box(x), order))
            });
        }
    }
    g.finish();
}

fn integrals(c: &mut Criterion) {
    let mut g = c.benchmark_group("integrals");
    g.sample_size(20);
    let s2 = sphere_rule(2, 512).unwrap();
    let b2 = ball_rule(2, 4, &s2).unwrap();
    let body = ConvexBody::gauge(net(2, 64));
    let mut grad = vec![0.0; body.f.num_params()];
    g.bench_function("volume_grad/2", |b| b.iter(|| body.volume_grad(&b2, Some(&mut grad)).unwrap()));
    g.bench_function("mahler/2", |b| b.iter(|| mahler_volume(&body.f, &b2, Some(&mut grad)).unwrap()));
    let s3 = sphere_rule(3, 2048).unwrap();
    let support = ConvexBody::support(net(3, 128));
    let mut grad = vec![0.0; support.f.num_params()];
    let kappa = ellipsoid_curvature(&[1.3, 1.0, 0.8]);
    g.bench_function("minkowski/3", |b| b.iter(|| minkowski_loss(&support, &kappa, &s3, Some(&mut grad)).unwrap()));
    g.finish();
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("pde");
    g.sample_size(10);
    let body = ConvexBody::gauge(net(2, 32));
    g.bench_function("mfs_torsion/2", |b| b.iter(|| solve_torsion_mfs(&body, &MfsConfig::default()).unwrap()));
    let one = Expr::parse("1").unwrap();
    let cfg = GalerkinConfig::for_dim(2);
    g.bench_function("galerkin/2", |b| b.iter(|| solve_galerkin(&body, &one, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, evaluation, integrals, solvers);
criterion_main!(benches);
