//! Objectives and metrics over convex bodies: noisy-sample fitting, PDE
//! objectives, torsion-gradient ratios, prescribed Gauss curvature, Mahler
//! volume, isoperimetric deficit, the polytope approximation harness and
//! repeated-run statistics.
//!
//! Every loss takes an optional gradient buffer; gradients are added into it.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{curvatures_point, integrate_functional, ConvexBody, Kind, LocalJet, PointFunctional};
use crate::net::SublinearNet;
use crate::pde::{poisson_objective as galerkin_objective, torsion_gradient_data, GalerkinConfig, MfsModel};
use crate::quadrature::{ball_volume, sphere_area, sphere_rule, BallRule, SphereRule};
use crate::sublinear::{PolytopeMax, Sublinear};

/// Noisy boundary samples of a target body.
#[derive(Debug, Clone)]
pub struct FitDataset {
    pub samples: Vec<Vec<f64>>,
    pub sigma: f64,
    pub seed: u64,
}

/// Uniform directions `x_i` on the sphere, `y_i = φ_T(x_i) + ε_i` with
/// componentwise `ε ~ N(0, σ²)`.
pub fn generate_noisy_samples<G: Sublinear + Clone>(
    target: &ConvexBody<G>,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<FitDataset> {
    if n == 0 || !(sigma >= 0.0) {
        return Err(Error::Domain("need n ≥ 1 samples and σ ≥ 0".into()));
    }
    let d = target.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r < 1e-12 {
            continue;
        }
        let x: Vec<f64> = v.iter().map(|a| a / r).collect();
        let mut y = target.map(&x)?;
        if sigma > 0.0 {
            for c in y.iter_mut() {
                *c += noise.sample(&mut rng);
            }
        }
        samples.push(y);
    }
    Ok(FitDataset { samples, sigma, seed })
}

struct FitFunctional;

impl PointFunctional for FitFunctional {
    fn order(&self) -> usize {
        0
    }
    fn eval<T: Real>(&self, _: usize, _: &[f64], jet: &LocalJet<T>) -> T {
        let r = jet.p - 1.0;
        r * r
    }
}

/// `Σ_i (p(y_i) − 1)²` for a gauge body. Samples at the origin are skipped.
pub fn fit_loss<F: Sublinear + Clone>(
    body: &ConvexBody<F>,
    data: &FitDataset,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    if body.kind != Kind::Gauge {
        return Err(Error::Unsupported("the fit loss needs a gauge body".into()));
    }
    let kept: Vec<Vec<f64>> =
        data.samples.iter().filter(|y| y.iter().map(|a| a * a).sum::<f64>() > 1e-24).cloned().collect();
    if kept.len() < data.samples.len() {
        log::warn!("skipped {} samples at the origin", data.samples.len() - kept.len());
    }
    let ones = vec![1.0; kept.len()];
    integrate_functional(&body.f, &kept, &ones, &FitFunctional, grad)
}

/// `‖p_θ − 1‖_{L²(∂Ω_T)}`, integrated over the target boundary through its
/// boundary map with `n` sphere nodes.
pub fn accuracy_l2<F: Sublinear + Clone, G: Sublinear + Clone>(
    body: &ConvexBody<F>,
    target: &ConvexBody<G>,
    n: usize,
) -> Result<f64> {
    if body.kind != Kind::Gauge {
        return Err(Error::Unsupported("accuracy is measured through the gauge".into()));
    }
    let rule = sphere_rule(target.dim(), n)?;
    let s = target.surface_integral(|fr| (body.f.value(&fr.y) - 1.0).powi(2), &rule)?;
    Ok(s.sqrt())
}

/// `J = ∫_Ω u` with `−Δu = f`, `u = 0` on `∂Ω` (Galerkin).
pub fn poisson_objective<F: Sublinear + Clone>(
    body: &ConvexBody<F>,
    source: &Expr,
    cfg: &GalerkinConfig,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    Ok(galerkin_objective(body, source, cfg, grad)?.objective)
}

/// The two torsion-gradient ratios and their ingredients.
#[derive(Debug, Clone)]
pub struct TorsionObjectives {
    pub normal_derivative: f64,
    pub volume: f64,
    pub perimeter: f64,
    /// `|∂_n u(φ(x*))| / Vol^{1/d}`.
    pub j_vol: f64,
    /// `|∂_n u(φ(x*))| / Per^{1/(d−1)}`.
    pub j_per: f64,
    pub grad_vol: Option<Vec<f64>>,
    pub grad_per: Option<Vec<f64>>,
}

pub fn torsion_gradient_objectives<F: Sublinear + Clone>(
    body: &ConvexBody<F>,
    model: &MfsModel,
    x_star: &[f64],
    ball: &BallRule,
    want_grad: bool,
) -> Result<TorsionObjectives> {
    let d = body.dim() as f64;
    let np = body.f.num_params();
    let data = torsion_gradient_data(body, model, x_star, want_grad)?;
    let (mut gv, mut gp) = (vec![0.0; np], vec![0.0; np]);
    let vol = body.volume_grad(ball, want_grad.then_some(&mut gv[..]))?;
    let per = body.surface_area_grad(&ball.sphere, want_grad.then_some(&mut gp[..]))?;
    let q = data.normal_derivative;
    let aq = q.abs();
    let j_vol = aq / vol.powf(1.0 / d);
    let j_per = aq / per.powf(1.0 / (d - 1.0));
    let (grad_vol, grad_per) = match data.grad {
        Some(gq) => {
            let sg = q.signum();
            let a: Vec<f64> = (0..np).map(|k| sg * gq[k] / vol.powf(1.0 / d) - j_vol / (d * vol) * gv[k]).collect();
            let b: Vec<f64> =
                (0..np).map(|k| sg * gq[k] / per.powf(1.0 / (d - 1.0)) - j_per / ((d - 1.0) * per) * gp[k]).collect();
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    Ok(TorsionObjectives { normal_derivative: q, volume: vol, perimeter: per, j_vol, j_per, grad_vol, grad_per })
}

/// Saint-Venant ratio `T / Vol^{(d+2)/d}` (maximised by balls) and optionally its gradient.
pub fn saint_venant_ratio<F: Sublinear + Clone>(
    body: &ConvexBody<F>,
    model: &MfsModel,
    ball: &BallRule,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let d = body.dim() as f64;
    let np = body.f.num_params();
    let want = grad.is_some();
    let (mut gt, mut gv) = (vec![0.0; np], vec![0.0; np]);
    let t = model.rigidity_grad(body, ball, want.then_some(&mut gt[..]))?;
    let v = body.volume_grad(ball, want.then_some(&mut gv[..]))?;
    let e = (d + 2.0) / d;
    let ratio = t / v.powf(e);
    if let Some(g) = grad {
        for k in 0..np {
            g[k] += gt[k] / v.powf(e) - e * ratio / v * gv[k];
        }
    }
    Ok(ratio)
}

/// The Saint-Venant ratio of the ball in dimension `d`: `T(B)/|B|^{(d+2)/d}`
/// with `T(B) = |B|/(d(d+2))`.
pub fn saint_venant_ball(d: usize) -> f64 {
    let v = ball_volume(d);
    v / (d * (d + 2)) as f64 / v.powf((d as f64 + 2.0) / d as f64)
}

struct MinkowskiFunctional<'a> {
    g: &'a [f64],
}

impl PointFunctional for MinkowskiFunctional<'_> {
    fn order(&self) -> usize {
        Kind::Support.curvature_order()
    }
    fn eval<T: Real>(&self, node: usize, _: &[f64], jet: &LocalJet<T>) -> T {
        let (_, kappa) = curvatures_point(Kind::Support, jet);
        let r = (kappa - self.g[node]) / self.g[node];
        r * r
    }
}

/// `∫_{S} ((κ(φ(u)) − g(u))/g(u))² du` for a support body, where the sphere
/// point `u` is also the outer normal at `φ(u)`.
pub fn minkowski_loss<F: Sublinear + Clone>(
    body: &ConvexBody<F>,
    g: impl Fn(&[f64]) -> f64,
    sphere: &SphereRule,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    if body.kind != Kind::Support {
        return Err(Error::Unsupported("the Minkowski loss needs a support body".into()));
    }
    let gv: Vec<f64> = sphere.nodes.iter().map(|u| g(u)).collect();
    if let Some(i) = gv.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("prescribed curvature is not positive at node {i}")));
    }
    integrate_functional(&body.f, &sphere.nodes, &sphere.weights, &MinkowskiFunctional { g: &gv }, grad)
}

/// Relative L² curvature error `sqrt(L / |S^{d−1}|)` from a Minkowski loss value.
pub fn minkowski_relative_error(loss: f64, d: usize) -> f64 {
    (loss / sphere_area(d)).sqrt()
}

/// Gauss curvature of the ellipsoid with semi-axes `axes` as a function of the
/// outer normal: `h(u)^{d+1} / (Π a_i)²`.
pub fn ellipsoid_curvature(axes: &[f64]) -> impl Fn(&[f64]) -> f64 + '_ {
    move |u| {
        let h = axes.iter().zip(u).map(|(a, x)| a * a * x * x).sum::<f64>().sqrt();
        let prod: f64 = axes.iter().product();
        h.powi(axes.len() as i32 + 1) / (prod * prod)
    }
}

/// `Vol(K)·Vol(K°)` where `f` is the gauge of `K` and the support function of `K°`.
pub fn mahler_volume<F: Sublinear + Clone>(f: &F, ball: &BallRule, grad: Option<&mut [f64]>) -> Result<f64> {
    let body = ConvexBody::gauge(f.clone());
    let polar = body.polar();
    match grad {
        None => Ok(body.volume(ball)? * polar.volume(ball)?),
        Some(g) => {
            let np = f.num_params();
            let (mut ga, mut gb) = (vec![0.0; np], vec![0.0; np]);
            let a = body.volume_grad(ball, Some(&mut ga))?;
            let b = polar.volume_grad(ball, Some(&mut gb))?;
            for k in 0..np {
                g[k] += ga[k] * b + a * gb[k];
            }
            Ok(a * b)
        }
    }
}

/// Mahler volume of the regular `n`-gon, `n² sin²(π/n)`.
pub fn regular_polygon_mahler(n: usize) -> f64 {
    let s = (std::f64::consts::PI / n as f64).sin();
    (n * n) as f64 * s * s
}

/// `c_d Per / Vol^{(d−1)/d} − 1` with `c_d = (d |B|^{1/d})⁻¹`.
pub fn isoperimetric_deficit<F: Sublinear + Clone>(body: &ConvexBody<F>, ball: &BallRule) -> Result<f64> {
    let d = body.dim() as f64;
    let c = 1.0 / (d * ball_volume(body.dim()).powf(1.0 / d));
    let v = body.volume(ball)?;
    let p = body.surface_area(&ball.sphere)?;
    Ok(c * p / v.powf((d - 1.0) / d) - 1.0)
}

/// One row of the polytope approximation sweep.
#[derive(Debug, Clone)]
pub struct UatRow {
    pub beta: f64,
    /// `sup |p_net − p_P|` over the sphere samples.
    pub max_gap: f64,
    /// `β log m`.
    pub gap_bound: f64,
    pub hausdorff: f64,
    pub hausdorff_bound: f64,
}

/// Builds `from_polytope_*` nets for each `β` and measures the function gap
/// and the Hausdorff estimate against the exact polytope on `n` sphere samples.
///
/// `rows` are facet normals (gauge) or vertices (support). For gauges the
/// Hausdorff bound is `2β log m / α²` with `α = min_S p_P`; for support
/// functions the Hausdorff distance is the function gap itself.
pub fn uat_harness(rows: &[Vec<f64>], kind: Kind, betas: &[f64], n: usize) -> Result<Vec<UatRow>> {
    let d = rows.first().map(|r| r.len()).ok_or_else(|| Error::Domain("empty polytope".into()))?;
    let poly = PolytopeMax::new(rows.to_vec());
    let rule = sphere_rule(d, n)?;
    let m = rows.len() as f64;
    let alpha = rule.nodes.iter().map(|u| poly.value(u)).fold(f64::INFINITY, f64::min);
    if !(alpha > 0.0) {
        return Err(Error::InvalidBody("polytope function is not positive on the sphere".into()));
    }
    let exact = ConvexBody::new(poly.clone(), kind);
    betas
        .iter()
        .map(|&beta| {
            let net = match kind {
                Kind::Gauge => SublinearNet::from_polytope_gauge(rows, beta)?,
                Kind::Support => SublinearNet::from_polytope_support(rows, beta)?,
            };
            let max_gap = rule.nodes.iter().map(|u| (net.value(u) - poly.value(u)).abs()).fold(0.0, f64::max);
            let hausdorff = match kind {
                Kind::Gauge => {
                    rule.nodes.iter().map(|u| (1.0 / net.value(u) - 1.0 / poly.value(u)).abs()).fold(0.0, f64::max)
                }
                Kind::Support => exact.hausdorff_estimate(&ConvexBody::support(net.clone()), n)?.value,
            };
            let gap_bound = beta * m.ln();
            let hausdorff_bound = match kind {
                Kind::Gauge => 2.0 * gap_bound / (alpha * alpha),
                Kind::Support => gap_bound,
            };
            Ok(UatRow { beta, max_gap, gap_bound, hausdorff, hausdorff_bound })
        })
        .collect()
}

/// Quartiles of a repeated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub values: Vec<f64>,
    pub failures: usize,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Runs `run(seed)` for every seed (in parallel), drops failures and returns quartiles.
pub fn run_statistics<R>(seeds: &[u64], run: R) -> Result<Summary>
where
    R: Fn(u64) -> Result<f64> + Sync,
{
    if seeds.len() < 3 {
        return Err(Error::Domain("statistics need at least 3 repeats".into()));
    }
    let results: Vec<Result<f64>> = seeds.par_iter().map(|&s| run(s)).collect();
    let mut values = Vec::new();
    let mut failures = 0;
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                log::warn!("run with seed {seed} returned {v}");
                failures += 1;
            }
            Err(e) => {
                log::warn!("run with seed {seed} failed: {e}");
                failures += 1;
            }
        }
    }
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        q25: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q75: quantile(&sorted, 0.75),
        values,
        failures,
    })
}

/// Named scalar metrics in insertion order, written as `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub entries: Vec<(String, f64)>,
}

impl MetricsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: f64) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == key).map(|e| e.1)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v:.17e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = MetricsReport::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.rsplit_once('=').ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", i + 1)))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad number", i + 1)))?;
            r.set(k.trim(), v);
        }
        Ok(r)
    }
}

/// Random uniform unit vector (used by property checks and initialisation).
pub fn random_direction(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if r > 1e-8 {
            return v.iter().map(|a| a / r).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::compare_gradient;
    use crate::net::{SymmetrizedNet, SymmetryGroup};
    use crate::pde::MfsConfig;
    use crate::quadrature::ball_rule;
    use crate::sublinear::Quadratic;
    use std::f64::consts::PI;

    fn near_ball(d: usize, m: usize, seed: u64) -> SublinearNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = sphere_rule(d, 256).unwrap();
        let mut net = SublinearNet::random(d, m, &mut rng);
        for w in net.w.iter_mut() {
            *w *= 0.5;
        }
        net.normalize_scale(&rule).unwrap()
    }

    #[test]
    fn noisy_samples() {
        let ball = ConvexBody::gauge(Quadratic::ball(3, 1.0));
        let clean = generate_noisy_samples(&ball, 200, 0.0, 5).unwrap();
        assert!(clean.samples.iter().all(|y| (ball.f.value(y) - 1.0).abs() < 1e-10));
        let a = generate_noisy_samples(&ball, 50, 0.1, 9).unwrap();
        let b = generate_noisy_samples(&ball, 50, 0.1, 9).unwrap();
        assert_eq!(a.samples, b.samples);
        // E‖y‖² = 1 + 3σ² on the unit sphere
        let sigma = 0.2;
        let noisy = generate_noisy_samples(&ball, 100_000, sigma, 1).unwrap();
        let mean: f64 = noisy.samples.iter().map(|y| y.iter().map(|a| a * a).sum::<f64>() - 1.0).sum::<f64>() / 1e5;
        assert!((mean / (3.0 * sigma * sigma) - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn fit_loss_values_and_gradient() {
        let ball = ConvexBody::gauge(Quadratic::ball(2, 1.0));
        let on = generate_noisy_samples(&ball, 40, 0.0, 1).unwrap();
        assert!(fit_loss(&ball, &on, None).unwrap() < 1e-20);
        let out = FitDataset {
            samples: on.samples.iter().map(|y| y.iter().map(|a| a * 1.1).collect()).collect(),
            ..on.clone()
        };
        assert!((fit_loss(&ball, &out, None).unwrap() - 40.0 * 0.01).abs() < 1e-12);
        let body = ConvexBody::gauge(near_ball(2, 8, 3));
        let data =
            generate_noisy_samples(&ConvexBody::gauge(Quadratic::ellipsoid_gauge(&[1.3, 0.7])), 64, 0.02, 4).unwrap();
        let theta = body.f.params();
        let mut g = vec![0.0; theta.len()];
        fit_loss(&body, &data, Some(&mut g)).unwrap();
        let r = compare_gradient(|t| fit_loss(&body.with_params(t), &data, None).unwrap(), g, &theta, 1e-6);
        assert!(r.max_rel_error < 1e-5, "{}", r.max_rel_error);
    }

    #[test]
    fn accuracy_metric() {
        let unit = ConvexBody::gauge(Quadratic::ball(2, 1.0));
        assert!(accuracy_l2(&unit, &unit, 10_000).unwrap() < 1e-10);
        // target radius 2: p = 2 on a circle of length 4π
        let big = ConvexBody::gauge(Quadratic::ball(2, 0.5));
        let acc = accuracy_l2(&unit, &big, 10_000).unwrap();
        assert!((acc - (4.0 * PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn torsion_objective_values() {
        let s = sphere_rule(2, 256).unwrap();
        let b = ball_rule(2, 16, &s).unwrap();
        let cfg = MfsConfig::default();
        let mut first: Option<TorsionObjectives> = None;
        for r in [1.0, 0.5, 2.0] {
            // gauge placement of MFS sources is scale-equivariant
            let disk = ConvexBody::gauge(Quadratic::ball(2, 1.0 / r));
            let m = crate::pde::solve_torsion_mfs(&disk, &cfg).unwrap();
            let t = torsion_gradient_objectives(&disk, &m, &[1.0, 0.0], &b, false).unwrap();
            assert!((t.j_vol - 0.5 / PI.sqrt()).abs() < 1e-5, "{}", t.j_vol);
            assert!((t.j_per - 0.5 / (2.0 * PI)).abs() < 1e-5);
            match &first {
                None => first = Some(t),
                Some(f) => {
                    assert!((t.j_vol - f.j_vol).abs() < 1e-6, "{} {}", t.j_vol, f.j_vol);
                    assert!((t.j_per - f.j_per).abs() < 1e-6);
                }
            }
        }
        let s3 = sphere_rule(3, 2048).unwrap();
        let b3 = ball_rule(3, 8, &s3).unwrap();
        let ball = ConvexBody::support(Quadratic::ball(3, 1.0));
        let m = crate::pde::solve_torsion_mfs(&ball, &MfsConfig { n0: 128, eps0: 0.6, tol: 1e-4, ..cfg }).unwrap();
        let t = torsion_gradient_objectives(&ball, &m, &[1.0, 0.0, 0.0], &b3, false).unwrap();
        let expect = (1.0 / 3.0) / (4.0 * PI / 3.0f64).powf(1.0 / 3.0);
        assert!((t.j_vol - expect).abs() < 1e-3, "{} {expect}", t.j_vol);
    }

    #[test]
    fn torsion_objective_gradients() {
        let s = sphere_rule(2, 128).unwrap();
        let b = ball_rule(2, 4, &s).unwrap();
        let cfg = MfsConfig::default();
        let body = ConvexBody::gauge(near_ball(2, 6, 8));
        let theta = body.f.params();
        let (n, eps) = (32, 0.3);
        let m = MfsModel::fit(&body, n, eps, &cfg).unwrap();
        let t = torsion_gradient_objectives(&body, &m, &[1.0, 0.0], &b, true).unwrap();
        let eval = |t: &[f64]| {
            let bt = body.with_params(t);
            let mt = MfsModel::fit(&bt, n, eps, &cfg).unwrap();
            torsion_gradient_objectives(&bt, &mt, &[1.0, 0.0], &b, false).unwrap()
        };
        let r = compare_gradient(|t| eval(t).j_vol, t.grad_vol.unwrap(), &theta, 1e-6);
        assert!(r.max_rel_error < 1e-4, "{}", r.max_rel_error);
        let r = compare_gradient(|t| eval(t).j_per, t.grad_per.unwrap(), &theta, 1e-6);
        assert!(r.max_rel_error < 1e-4, "{}", r.max_rel_error);
        let mut g = vec![0.0; theta.len()];
        saint_venant_ratio(&body, &m, &b, Some(&mut g)).unwrap();
        let r = compare_gradient(
            |t| {
                let bt = body.with_params(t);
                saint_venant_ratio(&bt, &MfsModel::fit(&bt, n, eps, &cfg).unwrap(), &b, None).unwrap()
            },
            g,
            &theta,
            1e-6,
        );
        assert!(r.max_rel_error < 1e-4, "{}", r.max_rel_error);
    }

    #[test]
    fn saint_venant_of_disk() {
        let s = sphere_rule(2, 256).unwrap();
        let b = ball_rule(2, 16, &s).unwrap();
        let disk = ConvexBody::gauge(Quadratic::ball(2, 1.0));
        let m = crate::pde::solve_torsion_mfs(&disk, &MfsConfig::default()).unwrap();
        let r = saint_venant_ratio(&disk, &m, &b, None).unwrap();
        assert!((r - 1.0 / (8.0 * PI)).abs() < 1e-8);
        assert!((saint_venant_ball(2) - 1.0 / (8.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn minkowski_loss_on_ellipsoid() {
        let s = sphere_rule(3, 2048).unwrap();
        let ball = ConvexBody::support(Quadratic::ball(3, 1.0));
        assert!(minkowski_loss(&ball, |_| 1.0, &s, None).unwrap() < 1e-20);
        let axes = [1.3, 1.0, 0.8];
        let ell = ConvexBody::support(Quadratic::ellipsoid_support(&axes));
        assert!(minkowski_loss(&ell, ellipsoid_curvature(&axes), &s, None).unwrap() < 1e-10);
        assert!(matches!(minkowski_loss(&ell, |_| -1.0, &s, None), Err(Error::Domain(_))));
        // gradient on a random support net
        let body = ConvexBody::support(near_ball(3, 8, 2));
        let small = sphere_rule(3, 128).unwrap();
        let theta = body.f.params();
        let mut g = vec![0.0; theta.len()];
        minkowski_loss(&body, ellipsoid_curvature(&axes), &small, Some(&mut g)).unwrap();
        let r = compare_gradient(
            |t| minkowski_loss(&body.with_params(t), ellipsoid_curvature(&axes), &small, None).unwrap(),
            g,
            &theta,
            1e-5,
        );
        assert!(r.max_rel_error < 1e-3, "{}", r.max_rel_error);
    }

    #[test]
    fn mahler_values_and_gradient() {
        let s = sphere_rule(2, 8192).unwrap();
        let b = ball_rule(2, 4, &s).unwrap();
        let disk = Quadratic::ball(2, 1.0);
        assert!((mahler_volume(&disk, &b, None).unwrap() - PI * PI).abs() < 1e-9);
        let sq = SublinearNet::from_polytope_gauge(&PolytopeMax::cube_gauge(2).rows, 1e-3).unwrap();
        let mv = mahler_volume(&sq, &b, None).unwrap();
        assert!((mv / 8.0 - 1.0).abs() < 5e-3, "{mv}");
        assert!((regular_polygon_mahler(4) - 8.0).abs() < 1e-12);
        assert!((regular_polygon_mahler(6) - 9.0).abs() < 1e-12);
        // polarity invariance: same product with the roles swapped
        let net = near_ball(2, 6, 1);
        let a = ConvexBody::gauge(net.clone());
        let direct = a.volume(&b).unwrap() * a.polar().volume(&b).unwrap();
        assert_eq!(direct, mahler_volume(&net, &b, None).unwrap());
        // the symmetric ball is critical for the product, so differentiate away from it
        let mut rough = SublinearNet::random(2, 6, &mut ChaCha8Rng::seed_from_u64(4));
        for w in rough.w.iter_mut() {
            *w *= 2.0;
        }
        let sym = SymmetrizedNet::new(rough, SymmetryGroup::cyclic(2, 3).unwrap()).unwrap();
        let small = ball_rule(2, 2, &sphere_rule(2, 128).unwrap()).unwrap();
        let theta = sym.params();
        let mut g = vec![0.0; theta.len()];
        mahler_volume(&sym, &small, Some(&mut g)).unwrap();
        let r = compare_gradient(|t| mahler_volume(&sym.with_params(t), &small, None).unwrap(), g, &theta, 1e-6);
        assert!(r.max_rel_error < 1e-4, "{}", r.max_rel_error);
    }

    #[test]
    fn isoperimetric_deficit_values() {
        let s = sphere_rule(2, 4096).unwrap();
        let b = ball_rule(2, 4, &s).unwrap();
        assert!(isoperimetric_deficit(&ConvexBody::gauge(Quadratic::ball(2, 0.7)), &b).unwrap().abs() < 1e-6);
        let sq = SublinearNet::from_polytope_gauge(&PolytopeMax::cube_gauge(2).rows, 1e-4).unwrap();
        let def = isoperimetric_deficit(&ConvexBody::gauge(sq), &b).unwrap();
        assert!((def - (2.0 / PI.sqrt() - 1.0)).abs() < 2e-3, "{def}");
        let s3 = sphere_rule(3, 4096).unwrap();
        let b3 = ball_rule(3, 4, &s3).unwrap();
        assert!(isoperimetric_deficit(&ConvexBody::support(Quadratic::ball(3, 1.0)), &b3).unwrap().abs() < 1e-6);
    }

    #[test]
    fn uat_sweeps() {
        for d in [2, 3] {
            for rows in [PolytopeMax::cube_gauge(d).rows, PolytopeMax::simplex_gauge(d).rows] {
                let table = uat_harness(&rows, Kind::Gauge, &[1e-1, 1e-2, 1e-3], 2000).unwrap();
                for w in table.windows(2) {
                    assert!(w[1].hausdorff < w[0].hausdorff);
                }
                for r in &table {
                    assert!(r.max_gap <= r.gap_bound * (1.0 + 1e-12));
                    assert!(r.hausdorff <= r.hausdorff_bound);
                }
            }
        }
    }

    #[test]
    fn statistics_and_report() {
        let s =
            run_statistics(
                &[1, 2, 3, 4, 5],
                |seed| {
                    if seed == 3 {
                        Err(Error::Solver("x".into()))
                    } else {
                        Ok(seed as f64)
                    }
                },
            )
            .unwrap();
        assert_eq!(s.failures, 1);
        assert_eq!(s.median, 3.0);
        assert!(s.q25 <= s.median && s.median <= s.q75);
        let mut r = MetricsReport::new();
        r.set("volume", PI);
        r.set("deficit", 1e-3);
        r.set("volume", 2.0);
        let back = MetricsReport::from_text(&r.to_text()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get("volume"), Some(2.0));
    }
}
