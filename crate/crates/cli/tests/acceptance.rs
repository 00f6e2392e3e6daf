//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach the
//! terminal. Set `CONVEXNET_LONG=1` to include the three-dimensional
//! torsion-gradient optimisation.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use convexnet::autodiff::compare_gradient;
use convexnet::geometry::{ConvexBody, Kind};
use convexnet::net::{SublinearNet, SymmetrizedNet, SymmetryGroup};
use convexnet::pde::{MfsConfig, MfsModel};
use convexnet::problems::{
    ellipsoid_curvature, fit_loss, generate_noisy_samples, mahler_volume, minkowski_loss, torsion_gradient_objectives,
    MetricsReport,
};
use convexnet::quadrature::{ball_rule, sphere_rule, SphereRule};
use convexnet::sublinear::{Quadratic, Sublinear};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

/// Writes a config into a scratch directory, runs it like `convexnet run` and
/// returns the metrics it wrote.
fn run_config(text: &str) -> (MetricsReport, Duration) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let start = Instant::now();
    let result = convexnet_cli::execute(&cfg, Some(&out));
    let elapsed = start.elapsed();
    if let Err(e) = result {
        panic!("run failed: {e:#}\n{text}");
    }
    (read_metrics(&out), elapsed)
}

fn read_metrics(dir: &Path) -> MetricsReport {
    MetricsReport::from_text(&std::fs::read_to_string(dir.join("metrics.txt")).unwrap()).unwrap()
}

fn metric(m: &MetricsReport, key: &str) -> f64 {
    m.get(key).unwrap_or_else(|| panic!("metric `{key}` missing"))
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}

/// Random net with weights shrunk towards a round shape and unit sphere mean.
fn smooth_net(d: usize, m: usize, seed: u64) -> SublinearNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = SublinearNet::random(d, m, &mut rng);
    for w in net.w.iter_mut() {
        *w *= 0.5;
    }
    net.normalize_scale(&sphere_rule(d, 256).unwrap()).unwrap()
}

// ---------------------------------------------------------------------------

fn sublinearity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut homog, mut subadd) = (0.0f64, f64::NEG_INFINITY);
    for t in 0..1000 {
        let d = 2 + t % 3;
        // a single direction averaged over a rotation group is the zero function
        let m = rng.random_range(2..=32);
        let mut base = SublinearNet::random(d, m, &mut rng);
        base.s = rng.random_range(-3.0..1.0);
        let group = if t % 2 == 0 { SymmetryGroup::trivial(d) } else { SymmetryGroup::cyclic(d, 2 + t % 7).unwrap() };
        let net = SymmetrizedNet::new(base, group).unwrap();
        let (x, y) = (gaussian(&mut rng, d), gaussian(&mut rng, d));
        let lambda: f64 = rng.random_range(1e-3..1e3);
        let lx: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        let px = net.value(&x);
        homog = homog.max((net.value(&lx) - lambda * px).abs() / (lambda * px.abs()).max(f64::MIN_POSITIVE));
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        subadd = subadd.max(net.value(&xy) - px - net.value(&y));
    }
    let el = start.elapsed();
    outcome(
        homog < 1e-12 && subadd <= 1e-9 && within(el, 5.0),
        format!("max homogeneity error {homog:.2e}, max p(x+y)-p(x)-p(y) {subadd:.2e}, {:.2}s", el.as_secs_f64()),
    )
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst: Vec<(&str, f64, f64)> = Vec::new();
    let mut record = |name: &'static str, err: f64, tol: f64| match worst.iter_mut().find(|w| w.0 == name) {
        Some(w) => w.1 = w.1.max(err),
        None => worst.push((name, err, tol)),
    };
    let s2 = sphere_rule(2, 128).unwrap();
    let b2 = ball_rule(2, 4, &s2).unwrap();
    let s3 = sphere_rule(3, 128).unwrap();
    let b3 = ball_rule(3, 2, &s3).unwrap();
    let cfg = MfsConfig::default();
    let target = ConvexBody::gauge(Quadratic::ellipsoid_gauge(&[1.3, 0.7]));
    let data = generate_noisy_samples(&target, 64, 0.02, 4).unwrap();
    let axes = [1.3, 1.0, 0.8];
    for k in 0..10u64 {
        // noisy-sample fit
        let body = ConvexBody::gauge(smooth_net(2, 8, 100 + k));
        let theta = body.f.params();
        let mut g = vec![0.0; theta.len()];
        fit_loss(&body, &data, Some(&mut g)).unwrap();
        let r = compare_gradient(|t| fit_loss(&body.with_params(t), &data, None).unwrap(), g, &theta, 1e-6);
        record("fit", r.max_rel_error, 1e-4);

        // volume, both kinds and dimensions
        for (kind, d) in [(Kind::Gauge, 2), (Kind::Support, 2), (Kind::Gauge, 3), (Kind::Support, 3)] {
            let body = ConvexBody::new(smooth_net(d, 6, 200 + k), kind);
            let b = if d == 2 { &b2 } else { &b3 };
            let theta = body.f.params();
            let mut g = vec![0.0; theta.len()];
            body.volume_grad(b, Some(&mut g)).unwrap();
            let r = compare_gradient(|t| body.with_params(t).volume(b).unwrap(), g, &theta, 1e-6);
            record("volume", r.max_rel_error, 1e-4);
        }

        // torsional rigidity and the torsion-gradient functionals
        let body = ConvexBody::gauge(smooth_net(2, 6, 300 + k));
        let theta = body.f.params();
        let (n, eps) = (32, 0.3);
        let model = MfsModel::fit(&body, n, eps, &cfg).unwrap();
        let refit = |t: &[f64]| {
            let bt = body.with_params(t);
            let mt = MfsModel::fit(&bt, n, eps, &cfg).unwrap();
            (bt, mt)
        };
        let mut g = vec![0.0; theta.len()];
        model.rigidity_grad(&body, &b2, Some(&mut g)).unwrap();
        let r = compare_gradient(
            |t| {
                let (bt, mt) = refit(t);
                mt.torsional_rigidity(&bt, &b2).unwrap()
            },
            g,
            &theta,
            1e-6,
        );
        record("torsion rigidity", r.max_rel_error, 1e-4);
        let tg = torsion_gradient_objectives(&body, &model, &[1.0, 0.0], &b2, true).unwrap();
        let eval = |t: &[f64]| {
            let (bt, mt) = refit(t);
            torsion_gradient_objectives(&bt, &mt, &[1.0, 0.0], &b2, false).unwrap()
        };
        let r = compare_gradient(|t| eval(t).j_vol, tg.grad_vol.unwrap(), &theta, 1e-6);
        record("torsion-gradient J_Vol", r.max_rel_error, 1e-4);
        let r = compare_gradient(|t| eval(t).j_per, tg.grad_per.unwrap(), &theta, 1e-6);
        record("torsion-gradient J_Per", r.max_rel_error, 1e-4);

        // Minkowski
        let body = ConvexBody::support(smooth_net(3, 8, 400 + k));
        let theta = body.f.params();
        let mut g = vec![0.0; theta.len()];
        minkowski_loss(&body, ellipsoid_curvature(&axes), &s3, Some(&mut g)).unwrap();
        let r = compare_gradient(
            |t| minkowski_loss(&body.with_params(t), ellipsoid_curvature(&axes), &s3, None).unwrap(),
            g,
            &theta,
            1e-5,
        );
        record("minkowski", r.max_rel_error, 1e-3);

        // Mahler on a rough symmetric net (the round body is critical)
        let mut rough = SublinearNet::random(2, 6, &mut ChaCha8Rng::seed_from_u64(500 + k));
        for w in rough.w.iter_mut() {
            *w *= 2.0;
        }
        let sym = SymmetrizedNet::new(rough, SymmetryGroup::cyclic(2, 3 + (k as usize) % 4).unwrap()).unwrap();
        let small = ball_rule(2, 2, &s2).unwrap();
        let theta = sym.params();
        let mut g = vec![0.0; theta.len()];
        mahler_volume(&sym, &small, Some(&mut g)).unwrap();
        let r = compare_gradient(|t| mahler_volume(&sym.with_params(t), &small, None).unwrap(), g, &theta, 1e-6);
        record("mahler", r.max_rel_error, 1e-4);
    }
    let el = start.elapsed();
    let pass = worst.iter().all(|w| w.1 < w.2) && within(el, 180.0);
    let detail: Vec<String> = worst.iter().map(|w| format!("{} {:.1e}", w.0, w.1)).collect();
    outcome(pass, format!("worst relative errors: {}; {:.1}s", detail.join(", "), el.as_secs_f64()))
}

fn uat_bound() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for d in [2, 3] {
        for polytope in ["cube", "simplex"] {
            for kind in ["gauge", "support"] {
                let (m, _) = run_config(&format!(
                    "experiment = \"uat-check\"\ndimension = {d}\nkind = \"{kind}\"\n\
                     [uat-check]\npolytope = \"{polytope}\"\nbetas = [1e-1, 1e-2, 1e-3]\nsamples = 10000\n"
                ));
                if metric(&m, "gap_bound_holds") != 1.0 || metric(&m, "hausdorff_decreasing") != 1.0 {
                    failures.push(format!("{polytope} d={d} {kind}"));
                }
            }
        }
    }
    let el = start.elapsed();
    outcome(
        failures.is_empty() && within(el, 30.0),
        if failures.is_empty() {
            format!(
                "cube and simplex, d = 2, 3, gauge and support: gap <= beta log m, Hausdorff decreasing; {:.1}s",
                el.as_secs_f64()
            )
        } else {
            format!("violations: {}", failures.join("; "))
        },
    )
}

fn geometry_identities() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 5];
    let s2 = sphere_rule(2, 512).unwrap();
    let b2 = ball_rule(2, 4, &s2).unwrap();
    let s3 = sphere_rule(3, 2048).unwrap();
    let b3 = ball_rule(3, 4, &s3).unwrap();
    let check = |body_dim: usize, flux: f64, vol: f64, curv: f64, worst: &mut [f64; 5]| {
        worst[0] = worst[0].max((flux / (body_dim as f64 * vol) - 1.0).abs());
        if body_dim == 2 {
            worst[1] = worst[1].max((curv / (2.0 * PI) - 1.0).abs());
        } else {
            worst[2] = worst[2].max((curv / (4.0 * PI) - 1.0).abs());
        }
    };
    for kind in [Kind::Gauge, Kind::Support] {
        for seed in 0..3 {
            let body = ConvexBody::new(smooth_net(2, 16, 20 + seed), kind);
            let flux = body.surface_integral(|f| f.y[0] * f.n[0] + f.y[1] * f.n[1], &s2).unwrap();
            let tc = body.surface_integral(|f| body.mean_curvature(&f.x).unwrap(), &s2).unwrap();
            check(2, flux, body.volume(&b2).unwrap(), tc, &mut worst);
            let body = ConvexBody::new(smooth_net(3, 16, 30 + seed), kind);
            let flux = body.surface_integral(|f| f.y.iter().zip(&f.n).map(|(a, b)| a * b).sum(), &s3).unwrap();
            let gb = body.surface_integral(|f| body.gaussian_curvature(&f.x).unwrap(), &s3).unwrap();
            check(3, flux, body.volume(&b3).unwrap(), gb, &mut worst);
        }
        // analytic oracles
        let ell: ConvexBody<Quadratic> = match kind {
            Kind::Gauge => ConvexBody::gauge(Quadratic::ellipsoid_gauge(&[1.3, 0.7])),
            Kind::Support => ConvexBody::support(Quadratic::ellipsoid_support(&[1.3, 0.7])),
        };
        let flux = ell.surface_integral(|f| f.y[0] * f.n[0] + f.y[1] * f.n[1], &s2).unwrap();
        let tc = ell.surface_integral(|f| ell.mean_curvature(&f.x).unwrap(), &s2).unwrap();
        check(2, flux, ell.volume(&b2).unwrap(), tc, &mut worst);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in 2..=4 {
        for r in [0.5, 1.0, 2.5] {
            for body in [ConvexBody::gauge(Quadratic::ball(d, 1.0 / r)), ConvexBody::support(Quadratic::ball(d, r))] {
                for _ in 0..20 {
                    let x = convexnet::problems::random_direction(d, &mut rng);
                    let (h, kappa) = body.curvatures(&x).unwrap();
                    worst[3] = worst[3].max((h * r - 1.0).abs());
                    worst[4] = worst[4].max((kappa * r.powi(d as i32 - 1) - 1.0).abs());
                }
            }
        }
    }
    let el = start.elapsed();
    let pass = worst[0] < 1e-4 && worst[1] < 1e-3 && worst[2] < 1e-2 && worst[3] < 1e-6 && worst[4] < 1e-6;
    outcome(
        pass && within(el, 60.0),
        format!(
            "divergence {:.1e}, 2D total curvature {:.1e}, Gauss-Bonnet {:.1e}, ball H {:.1e}, ball kappa {:.1e}; {:.1}s",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            worst[4],
            el.as_secs_f64()
        ),
    )
}

fn rotate_rule(rule: &SphereRule, g: &SymmetryGroup, k: usize) -> SphereRule {
    SphereRule { d: rule.d, nodes: rule.nodes.iter().map(|x| g.apply(k, x)).collect(), weights: rule.weights.clone() }
}

fn symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut invariance, mut volumes) = (0.0f64, 0.0f64);
    for n in [2, 3, 4, 5, 6] {
        let g = SymmetryGroup::cyclic(2, n).unwrap();
        let base = smooth_net(2, 12, n as u64);
        let net = SymmetrizedNet::new(base, g.clone()).unwrap();
        for _ in 0..200 {
            let x = gaussian(&mut rng, 2);
            let p = net.value(&x);
            for k in 0..n {
                invariance = invariance.max((net.value(&g.apply(k, &x)) - p).abs());
            }
        }
        let s = sphere_rule(2, 512).unwrap();
        for kind in [Kind::Gauge, Kind::Support] {
            let body = ConvexBody::new(net.clone(), kind);
            let v = body.volume(&ball_rule(2, 4, &s).unwrap()).unwrap();
            for k in 1..n {
                let rotated = rotate_rule(&s, &g, k);
                let vr = body.volume(&ball_rule(2, 4, &rotated).unwrap()).unwrap();
                volumes = volumes.max((vr - v).abs() / v);
            }
        }
    }
    outcome(
        invariance < 1e-12 && volumes < 1e-12,
        format!("max |p(Rx)-p(x)| {invariance:.1e} over 1000 samples, max relative volume change {volumes:.1e}"),
    )
}

fn disk_torsion() -> Outcome {
    let (m, t_mfs) = run_config("experiment = \"pde-check\"\n[pde-check]\nbody = \"ball\"\nsolver = \"mfs\"\n");
    let (g, t_gal) = run_config(
        "experiment = \"pde-check\"\n[pde]\ncenters = 300\n[pde-check]\nbody = \"ball\"\nsolver = \"galerkin\"\n",
    );
    let res = metric(&m, "mfs.residual");
    let err = (metric(&m, "mfs.torsion") - PI / 8.0).abs();
    let dn = (metric(&m, "mfs.normal_derivative").abs() - 0.5).abs();
    let gal = metric(&g, "galerkin.torsion_rel_error");
    outcome(
        res < 1e-5 && err < 1e-4 && dn < 1e-4 && within(t_mfs, 10.0) && gal < 1e-2 && within(t_gal, 30.0),
        format!(
            "MFS residual {res:.1e}, |T-pi/8| {err:.1e}, ||du/dn|-0.5| {dn:.1e} ({:.1}s); Galerkin rel error {gal:.1e} ({:.1}s)",
            t_mfs.as_secs_f64(),
            t_gal.as_secs_f64()
        ),
    )
}

fn saint_venant() -> Outcome {
    let (m, t) = run_config(
        "experiment = \"saint-venant\"\ndimension = 2\n[net]\nm = 32\nseed = 0\n[optimizer]\nmax_iter = 300\n",
    );
    let deficit = metric(&m, "deficit");
    outcome(
        deficit < 1e-3 && within(t, 300.0),
        format!(
            "deficit {deficit:.1e} after {} iterations, ratio {:.6e} (ball {:.6e}); {:.1}s",
            metric(&m, "iterations"),
            metric(&m, "ratio"),
            metric(&m, "ratio_ball"),
            t.as_secs_f64()
        ),
    )
}

fn torsion_gradient_config(d: usize, normalization: &str) -> String {
    let (m, sphere, eps) = if d == 2 { (32, 512, 0.3) } else { (128, 2048, 0.6) };
    format!(
        "experiment = \"torsion-gradient\"\ndimension = {d}\n[net]\nm = {m}\n[quadrature]\nsphere = {sphere}\n\
         [optimizer]\nmax_iter = 300\n[pde]\nmfs_eps0 = {eps}\n[torsion-gradient]\nnormalization = \"{normalization}\"\n"
    )
}

fn torsion_gradient(long: bool) -> Outcome {
    let (v, tv) = run_config(&torsion_gradient_config(2, "volume"));
    let (p, tp) = run_config(&torsion_gradient_config(2, "perimeter"));
    let (jv, jp) = (metric(&v, "j_vol"), metric(&p, "j_per"));
    let mut pass = (0.354..=0.362).contains(&jv) && (0.0978..=0.0999).contains(&jp) && within(tv + tp, 600.0);
    let mut detail = format!("d=2: J_Vol {jv:.5}, J_Per {jp:.5} ({:.1}s)", (tv + tp).as_secs_f64());
    if long {
        let (v3, t3v) = run_config(&torsion_gradient_config(3, "volume"));
        let (p3, t3p) = run_config(&torsion_gradient_config(3, "perimeter"));
        let (jv3, jp3) = (metric(&v3, "j_vol"), metric(&p3, "j_per"));
        let ok3 = (jv3 / 0.30918 - 1.0).abs() < 0.02 && (jp3 / 0.13842 - 1.0).abs() < 0.02;
        pass &= ok3;
        detail += &format!("; d=3: J_Vol {jv3:.5}, J_Per {jp3:.5} ({:.1}s)", (t3v + t3p).as_secs_f64());
    } else {
        detail += "; d=3 skipped (set CONVEXNET_LONG=1)";
    }
    outcome(pass, detail)
}

fn minkowski() -> Outcome {
    let (m, t) = run_config(
        "experiment = \"minkowski\"\ndimension = 3\n[net]\nm = 128\n[quadrature]\nsphere = 2048\n\
         [optimizer]\nmax_iter = 300\n[minkowski]\ng_target = \"ellipsoid:1.3,1.0,0.8\"\n",
    );
    let err = metric(&m, "relative_error");
    outcome(
        err < 5e-2 && within(t, 900.0),
        format!(
            "relative L2 curvature error {err:.2e}, Hausdorff to the ellipsoid {:.1e}; {:.1}s",
            metric(&m, "hausdorff"),
            t.as_secs_f64()
        ),
    )
}

fn mahler() -> Outcome {
    let mut total = Duration::ZERO;
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 3..=6 {
        let (m, t) = run_config(&format!(
            "experiment = \"mahler\"\n[net]\nm = 32\nsymmetry = {n}\n[quadrature]\nsphere = 1024\nradial = 2\n\
             [optimizer]\nmax_iter = 300\n[mahler]\nstarts = 3\n"
        ));
        total += t;
        let gap = metric(&m, "relative_gap");
        pass &= gap.abs() < 0.015;
        parts.push(format!("n={n}: {:.5} ({:+.1e})", metric(&m, "mahler"), gap));
    }
    pass &= within(total, 600.0);
    outcome(pass, format!("{}; {:.1}s", parts.join(", "), total.as_secs_f64()))
}

fn fit_statistics() -> Outcome {
    let (m, t) = run_config(
        "experiment = \"fit-stats\"\ndimension = 3\nthreads = 0\n[net]\nm = 32\n[quadrature]\nsphere = 512\n\
         [optimizer]\nmax_iter = 1000\n[fit]\ntarget = \"octahedron\"\n\
         [fit-stats]\nsigmas = [0.0, 0.01, 0.05]\nrepeats = 20\nseed = 0\n",
    );
    let med0 = metric(&m, "sigma=0.median");
    let monotone = metric(&m, "median_monotone") == 1.0;
    let ordered = metric(&m, "quantiles_ordered") == 1.0;
    let failures: f64 = ["0", "0.01", "0.05"].iter().map(|s| metric(&m, &format!("sigma={s}.failures"))).sum();
    outcome(
        med0 < 1e-2 && monotone && ordered && within(t, 600.0),
        format!(
            "median Acc {:.2e} / {:.2e} / {:.2e}, monotone {monotone}, quantiles ordered {ordered}, failed runs {failures}; {:.1}s",
            med0,
            metric(&m, "sigma=0.01.median"),
            metric(&m, "sigma=0.05.median"),
            t.as_secs_f64()
        ),
    )
}

type Check = Box<dyn Fn() -> Outcome>;

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let long = std::env::var("CONVEXNET_LONG").is_ok_and(|v| v == "1");
    let criteria: Vec<(&str, Check)> = vec![
        ("sublinearity", Box::new(sublinearity)),
        ("parameter gradients", Box::new(gradients)),
        ("polytope approximation bound", Box::new(uat_bound)),
        ("geometry identities", Box::new(geometry_identities)),
        ("symmetry", Box::new(symmetry)),
        ("disk torsion", Box::new(disk_torsion)),
        ("Saint-Venant", Box::new(saint_venant)),
        ("torsion-gradient optimum", Box::new(move || torsion_gradient(long))),
        ("Minkowski ellipsoid", Box::new(minkowski)),
        ("Mahler polygons", Box::new(mahler)),
        ("fit statistics", Box::new(fit_statistics)),
    ];
    let filter: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| **f == id || name.to_lowercase().contains(&f.to_lowercase())) {
            continue;
        }
        let o = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)) {
            Ok(o) => o,
            Err(e) => {
                let msg =
                    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {:>2} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
