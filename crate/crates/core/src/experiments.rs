//! Experiment runners. Each takes a typed spec, builds the objective, runs the
//! optimizer with a positivity guard and returns metrics plus artifacts.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{ConvexBody, Kind};
use crate::net::{validate_positive, SublinearNet, SymmetrizedNet, SymmetryGroup};
use crate::optimize::{minimize, Control, OptimizeResult, Optimizer, RunLog};
use crate::pde::{
    poisson_objective as galerkin_objective, sample_csv, solve_galerkin, solve_torsion_mfs, GalerkinConfig, MfsConfig,
    MfsModel, PdeSolution,
};
use crate::problems::{
    accuracy_l2, ellipsoid_curvature, fit_loss, generate_noisy_samples, isoperimetric_deficit, mahler_volume,
    minkowski_loss, minkowski_relative_error, regular_polygon_mahler, run_statistics, saint_venant_ball,
    saint_venant_ratio, torsion_gradient_objectives, uat_harness, FitDataset, MetricsReport, Summary,
};
use crate::quadrature::{ball_rule, ball_volume, sphere_area, sphere_rule, BallRule, SphereRule};
use crate::sublinear::{Analytic, PolytopeMax, Quadratic, Sublinear};

/// Smallest admissible value of `p` on the check rule.
pub const POSITIVITY_EPS: f64 = 1e-8;

type Body = ConvexBody<SymmetrizedNet>;

/// Analytic reference bodies, all described through their gauge.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Ball(f64),
    Ellipsoid(Vec<f64>),
    Cube,
    Octahedron,
    Simplex,
}

impl Target {
    /// `ball`, `ball:R`, `ellipsoid:a,b[,c…]`, `cube`, `octahedron` (cross-polytope), `simplex`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let nums = |a: &str| -> Result<Vec<f64>> {
            a.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{v}` in `{s}`"))))
                .collect()
        };
        let t = match (name.trim(), arg) {
            ("ball", None) => Target::Ball(1.0),
            ("ball", Some(a)) => Target::Ball(nums(a)?.first().copied().unwrap_or(1.0)),
            ("ellipsoid", Some(a)) => Target::Ellipsoid(nums(a)?),
            ("cube", None) => Target::Cube,
            ("octahedron" | "cross-polytope", None) => Target::Octahedron,
            ("simplex", None) => Target::Simplex,
            _ => return Err(Error::Parse(format!("unknown target `{s}`"))),
        };
        match &t {
            Target::Ball(r) if !(*r > 0.0) => Err(Error::Parse("ball radius must be positive".into())),
            Target::Ellipsoid(a) if a.iter().any(|v| !(*v > 0.0)) => {
                Err(Error::Parse("ellipsoid axes must be positive".into()))
            }
            _ => Ok(t),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Target::Ball(r) => format!("ball:{r}"),
            Target::Ellipsoid(a) => {
                format!("ellipsoid:{}", a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            }
            Target::Cube => "cube".into(),
            Target::Octahedron => "octahedron".into(),
            Target::Simplex => "simplex".into(),
        }
    }

    pub fn gauge(&self, d: usize) -> Result<ConvexBody<Analytic>> {
        let f = match self {
            Target::Ball(r) => Analytic::Quadratic(Quadratic::ball(d, 1.0 / r)),
            Target::Ellipsoid(a) => {
                if a.len() != d {
                    return Err(Error::Domain(format!("ellipsoid has {} axes but d = {d}", a.len())));
                }
                Analytic::Quadratic(Quadratic::ellipsoid_gauge(a))
            }
            Target::Cube => Analytic::Polytope(PolytopeMax::cube_gauge(d)),
            Target::Octahedron => Analytic::Polytope(PolytopeMax::cross_polytope_gauge(d)),
            Target::Simplex => Analytic::Polytope(PolytopeMax::simplex_gauge(d)),
        };
        Ok(ConvexBody::gauge(f))
    }

    /// Closed-form torsional rigidity where one is known.
    pub fn torsion_exact(&self, d: usize) -> Option<f64> {
        match self {
            Target::Ball(r) => Some(ball_volume(d) * r.powi(d as i32 + 2) / (d * (d + 2)) as f64),
            Target::Ellipsoid(a) => {
                // u = (1 − Σ x²/a²)/(2 Σ 1/a²), T = ∫u = |E| / ((d+2) Σ 1/a²)
                let s: f64 = a.iter().map(|v| 1.0 / (v * v)).sum();
                let vol = ball_volume(d) * a.iter().product::<f64>();
                Some(vol / ((d + 2) as f64 * s))
            }
            _ => None,
        }
    }
}

/// Network initialisation.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub m: usize,
    pub seed: u64,
    /// `n`-fold rotational symmetry in the `x₁x₂`-plane.
    pub symmetry: Option<usize>,
    /// Explicit symmetry group; takes precedence over `symmetry`.
    pub group: Option<SymmetryGroup>,
}

impl NetSpec {
    pub fn default_for(d: usize) -> Self {
        NetSpec { m: if d == 2 { 64 } else { 128 }, seed: 0, symmetry: None, group: None }
    }

    /// Uniform random directions, `β = 1`, then rescaled so the sphere mean of `p` is 1.
    pub fn build(&self, d: usize, sphere: &SphereRule) -> Result<SymmetrizedNet> {
        if self.m == 0 {
            return Err(Error::Init("the net needs m ≥ 1 directions".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let base = SublinearNet::random(d, self.m, &mut rng);
        let group = match (&self.group, self.symmetry) {
            (Some(g), _) => g.clone(),
            (None, Some(n)) if n > 1 => SymmetryGroup::cyclic(d, n)?,
            _ => SymmetryGroup::trivial(d),
        };
        let net = SymmetrizedNet::new(base, group)?.normalize_scale(sphere)?;
        if !validate_positive(&net, sphere, POSITIVITY_EPS) {
            return Err(Error::Init("initial network is not positive on the sphere".into()));
        }
        Ok(net)
    }
}

/// Angular and radial quadrature sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    pub sphere: usize,
    pub radial: usize,
}

impl QuadSpec {
    pub fn default_for(d: usize) -> Self {
        match d {
            2 => QuadSpec { sphere: 512, radial: 4 },
            3 => QuadSpec { sphere: 2048, radial: 4 },
            _ => QuadSpec { sphere: 4096, radial: 4 },
        }
    }

    pub fn rules(&self, d: usize) -> Result<(SphereRule, BallRule)> {
        let s = sphere_rule(d, self.sphere)?;
        let b = ball_rule(d, self.radial, &s)?;
        Ok((s, b))
    }
}

/// A trained network together with its role.
#[derive(Debug, Clone)]
pub struct NetArtifact {
    pub net: SymmetrizedNet,
    pub kind: Kind,
}

impl NetArtifact {
    pub fn body(&self) -> Body {
        ConvexBody::new(self.net.clone(), self.kind)
    }

    /// Net file with a leading `# kind gauge|support` line.
    pub fn to_text(&self) -> String {
        let group = (self.net.group.len() > 1).then_some(&self.net.group);
        format!("# kind {}\n{}", self.kind.name(), self.net.base.to_text(group))
    }

    /// Reads a net file. `kind` overrides the `# kind` line; without either
    /// the body is a gauge.
    pub fn from_text(text: &str, kind: Option<Kind>) -> Result<Self> {
        let tagged = text.lines().find_map(|l| l.trim().strip_prefix("# kind ").map(|k| k.trim().to_string()));
        let kind = match (kind, tagged) {
            (Some(k), _) => k,
            (None, Some(k)) => Kind::parse(&k)?,
            (None, None) => Kind::Gauge,
        };
        let (base, group) = SublinearNet::from_text(text)?;
        let d = base.d;
        let net = SymmetrizedNet::new(base, group.unwrap_or_else(|| SymmetryGroup::trivial(d)))?;
        Ok(NetArtifact { net, kind })
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub metrics: MetricsReport,
    pub log: Option<RunLog>,
    pub net: Option<NetArtifact>,
    /// Additional `(file name, contents)` tables.
    pub tables: Vec<(String, String)>,
}

/// Common optimisation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub d: usize,
    pub net: NetSpec,
    pub quad: QuadSpec,
    pub optimizer: Optimizer,
    /// Record wall-clock columns and a runtime metric (breaks byte reproducibility).
    pub record_timing: bool,
}

impl TrainSpec {
    pub fn default_for(d: usize) -> Self {
        TrainSpec {
            d,
            net: NetSpec::default_for(d),
            quad: QuadSpec::default_for(d),
            optimizer: Optimizer::default(),
            record_timing: false,
        }
    }
}

/// Runs `opt` on `loss` over the parameters of `body0`, checking positivity of
/// every trial and every accepted iterate.
fn train<L, E>(
    body0: &Body,
    spec: &TrainSpec,
    check: &SphereRule,
    extra_names: &[&str],
    mut loss: L,
    mut extras: E,
) -> Result<(Body, OptimizeResult)>
where
    L: FnMut(&Body, &mut [f64]) -> Result<f64>,
    E: FnMut(&Body) -> Result<Vec<f64>>,
{
    let positive = |b: &Body| {
        if validate_positive(&b.f, check, POSITIVITY_EPS) {
            Ok(())
        } else {
            Err(Error::InvalidBody("network is no longer positive on the sphere".into()))
        }
    };
    let objective = |theta: &[f64], g: &mut [f64]| {
        let b = body0.with_params(theta);
        positive(&b)?;
        loss(&b, g)
    };
    let callback = |it: &crate::optimize::Iterate| {
        let b = body0.with_params(it.theta);
        positive(&b)?;
        Ok(Control { extras: extras(&b)?, stop: false })
    };
    let log = RunLog::new(extra_names, spec.record_timing);
    let res = minimize(objective, &body0.f.params(), &spec.optimizer, log, callback)?;
    log::info!("optimizer stopped after {} iterations: {:?}, value {:.6e}", res.iterations, res.reason, res.value);
    Ok((body0.with_params(&res.theta), res))
}

fn finish(metrics: &mut MetricsReport, res: &OptimizeResult, start: Instant, timing: bool) {
    metrics.set("iterations", res.iterations as f64);
    metrics.set("evaluations", res.evaluations as f64);
    metrics.set("grad_norm", res.grad_norm);
    if timing {
        metrics.set("runtime", start.elapsed().as_secs_f64());
    }
}

/// Adds `(ln(Vol/|B|))²` to a scale-invariant objective. Scaling the body is a
/// flat direction of such objectives, so the penalty only fixes the scale.
fn scale_anchor(body: &Body, ball: &BallRule, grad: &mut [f64]) -> Result<f64> {
    let mut gv = vec![0.0; grad.len()];
    let v = body.volume_grad(ball, Some(&mut gv))?;
    let l = (v / ball_volume(body.dim())).ln();
    for (g, dv) in grad.iter_mut().zip(&gv) {
        *g += 2.0 * l * dv / v;
    }
    Ok(l * l)
}

fn shape_metrics(metrics: &mut MetricsReport, body: &Body, sphere: &SphereRule, ball: &BallRule) -> Result<()> {
    metrics.set("volume", body.volume(ball)?);
    metrics.set("perimeter", body.surface_area(sphere)?);
    metrics.set("deficit", isoperimetric_deficit(body, ball)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// noisy-sample fit

#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    pub train: TrainSpec,
    pub target: Target,
    pub n_samples: usize,
    pub sigma: f64,
    pub data_seed: u64,
    /// Target boundary samples for the accuracy metric.
    pub accuracy_samples: usize,
    /// Log the accuracy at every iteration.
    pub track_accuracy: bool,
}

impl FitSpec {
    pub fn default_for(d: usize) -> Self {
        FitSpec {
            train: TrainSpec::default_for(d),
            target: Target::Ball(1.0),
            n_samples: 1000,
            sigma: 0.0,
            data_seed: 1,
            accuracy_samples: 10_000,
            track_accuracy: true,
        }
    }
}

pub fn run_fit(spec: &FitSpec) -> Result<RunOutput> {
    let start = Instant::now();
    let d = spec.train.d;
    let (sphere, ball) = spec.train.quad.rules(d)?;
    let target = spec.target.gauge(d)?;
    let data = generate_noisy_samples(&target, spec.n_samples, spec.sigma, spec.data_seed)?;
    let body0 = ConvexBody::gauge(spec.train.net.build(d, &sphere)?);
    let names: &[&str] = if spec.track_accuracy { &["accuracy"] } else { &[] };
    let (body, res) = train(
        &body0,
        &spec.train,
        &sphere,
        names,
        |b, g| fit_loss(b, &data, Some(g)),
        |b| {
            if spec.track_accuracy {
                Ok(vec![accuracy_l2(b, &target, spec.accuracy_samples)?])
            } else {
                Ok(vec![])
            }
        },
    )?;
    let mut m = MetricsReport::new();
    m.set("loss", res.value);
    m.set("accuracy", accuracy_l2(&body, &target, spec.accuracy_samples)?);
    m.set("hausdorff", body.hausdorff_estimate(&target, spec.accuracy_samples)?.value);
    shape_metrics(&mut m, &body, &sphere, &ball)?;
    finish(&mut m, &res, start, spec.train.record_timing);
    Ok(RunOutput {
        metrics: m,
        log: Some(res.log),
        net: Some(NetArtifact { net: body.f, kind: Kind::Gauge }),
        tables: vec![],
    })
}

/// Final accuracy of one fit without logging (used by the statistics runner).
pub fn fit_accuracy(spec: &FitSpec) -> Result<f64> {
    let d = spec.train.d;
    let (sphere, _) = spec.train.quad.rules(d)?;
    let target = spec.target.gauge(d)?;
    let data: FitDataset = generate_noisy_samples(&target, spec.n_samples, spec.sigma, spec.data_seed)?;
    let body0 = ConvexBody::gauge(spec.train.net.build(d, &sphere)?);
    let (body, _) = train(&body0, &spec.train, &sphere, &[], |b, g| fit_loss(b, &data, Some(g)), |_| Ok(vec![]))?;
    accuracy_l2(&body, &target, spec.accuracy_samples)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Sigma(Vec<f64>),
    Samples(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitStatsSpec {
    pub fit: FitSpec,
    pub sweep: Sweep,
    pub repeats: usize,
    pub seed: u64,
}

/// Repeated fits with fresh initialisation and samples per repeat. Repeat `r`
/// uses net seed `seed + 2r` and data seed `seed + 2r + 1` at every sweep value.
pub fn run_fit_stats(spec: &FitStatsSpec) -> Result<RunOutput> {
    let start = Instant::now();
    let (label, values): (&str, Vec<f64>) = match &spec.sweep {
        Sweep::Sigma(s) => ("sigma", s.clone()),
        Sweep::Samples(n) => ("n", n.iter().map(|&v| v as f64).collect()),
    };
    if values.is_empty() {
        return Err(Error::Domain("empty sweep".into()));
    }
    let seeds: Vec<u64> = (0..spec.repeats as u64).map(|r| spec.seed + 2 * r).collect();
    let mut csv = format!("{label},q25,median,q75,failures\n");
    let mut m = MetricsReport::new();
    let mut summaries: Vec<Summary> = Vec::new();
    for &v in &values {
        let summary = run_statistics(&seeds, |s| {
            let mut f = spec.fit.clone();
            f.track_accuracy = false;
            f.train.record_timing = false;
            f.train.net.seed = s;
            f.data_seed = s + 1;
            match spec.sweep {
                Sweep::Sigma(_) => f.sigma = v,
                Sweep::Samples(_) => f.n_samples = v as usize,
            }
            fit_accuracy(&f)
        })?;
        let _ =
            writeln!(csv, "{v},{:.17e},{:.17e},{:.17e},{}", summary.q25, summary.median, summary.q75, summary.failures);
        m.set(&format!("{label}={v}.q25"), summary.q25);
        m.set(&format!("{label}={v}.median"), summary.median);
        m.set(&format!("{label}={v}.q75"), summary.q75);
        m.set(&format!("{label}={v}.failures"), summary.failures as f64);
        summaries.push(summary);
    }
    let monotone = summaries.windows(2).all(|w| w[1].median >= w[0].median);
    let ordered = summaries.iter().all(|s| s.q25 <= s.median && s.median <= s.q75);
    m.set("median_monotone", if monotone { 1.0 } else { 0.0 });
    m.set("quantiles_ordered", if ordered { 1.0 } else { 0.0 });
    if spec.fit.train.record_timing {
        m.set("runtime", start.elapsed().as_secs_f64());
    }
    Ok(RunOutput { metrics: m, log: None, net: None, tables: vec![("stats.csv".into(), csv)] })
}

// ---------------------------------------------------------------------------
// Poisson objective

/// Two sign-changing default sources: negative near the origin, positive far away.
pub const POISSON_DEFAULT_SOURCES: [&str; 2] = ["x^2 + 2*y^2 - 0.6", "(x - 0.3)^2 + (y + 0.2)^2 + 0.8*x*y - 0.5"];

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSpec {
    pub train: TrainSpec,
    pub kind: Kind,
    pub source: String,
    pub galerkin: GalerkinConfig,
}

pub fn run_poisson(spec: &PoissonSpec) -> Result<RunOutput> {
    let start = Instant::now();
    let d = spec.train.d;
    let source = Expr::parse(&spec.source)?;
    if source.arity() > d {
        return Err(Error::Domain(format!("source uses x{} but d = {d}", source.arity())));
    }
    let (sphere, ball) = spec.train.quad.rules(d)?;
    let body0 = ConvexBody::new(spec.train.net.build(d, &sphere)?, spec.kind);
    let (body, res) = train(
        &body0,
        &spec.train,
        &sphere,
        &["volume"],
        |b, g| Ok(galerkin_objective(b, &source, &spec.galerkin, Some(g))?.objective),
        |b| Ok(vec![b.volume(&ball)?]),
    )?;
    let sol = solve_galerkin(&body, &source, &spec.galerkin)?;
    let mut m = MetricsReport::new();
    m.set("objective", sol.objective);
    shape_metrics(&mut m, &body, &sphere, &ball)?;
    finish(&mut m, &res, start, spec.train.record_timing);
    let table = sample_csv(&PdeSolution::Galerkin(sol), &body, 16, 64)?;
    Ok(RunOutput {
        metrics: m,
        log: Some(res.log),
        net: Some(NetArtifact { net: body.f, kind: spec.kind }),
        tables: vec![("solution.csv".into(), table)],
    })
}

// ---------------------------------------------------------------------------
// torsion-based objectives solved with fundamental solutions

/// Runs `train` with the MFS resolution `(n, ε)` frozen, so the objective is a
/// fixed function of θ. When the accepted iterate's fit residual exceeds
/// `restart_factor · tol`, the run stops, the resolution is re-adapted and the
/// optimizer restarts from there, at most `max_restarts` times.
#[allow(clippy::too_many_arguments)]
fn train_with_mfs<L, E>(
    body0: &Body,
    spec: &TrainSpec,
    mfs: &MfsConfig,
    restart_factor: f64,
    max_restarts: usize,
    extra_names: &[&str],
    mut loss: L,
    mut extras: E,
) -> Result<(Body, OptimizeResult, MfsModel)>
where
    L: FnMut(&Body, &MfsModel, &mut [f64]) -> Result<f64>,
    E: FnMut(&Body) -> Result<Vec<f64>>,
{
    let (sphere, _) = spec.quad.rules(spec.d)?;
    let mut body = body0.clone();
    let mut merged: Option<OptimizeResult> = None;
    let mut restarts = 0;
    loop {
        let adapted = solve_torsion_mfs(&body, mfs)?;
        let (n, eps) = (adapted.n_sources(), adapted.eps);
        log::info!("mfs resolution n = {n}, eps = {eps:.4}, residual {:.3e}", adapted.residual);
        let mut drifted = false;
        let remaining = match &spec.optimizer {
            Optimizer::Lbfgs(c) => c.max_iter.saturating_sub(merged.as_ref().map_or(0, |r| r.iterations)),
            Optimizer::Adam(c) => c.max_iter.saturating_sub(merged.as_ref().map_or(0, |r| r.iterations)),
        };
        let mut phase = spec.clone();
        match &mut phase.optimizer {
            Optimizer::Lbfgs(c) => c.max_iter = remaining,
            Optimizer::Adam(c) => c.max_iter = remaining,
        }
        let mut extras_names = vec!["mfs_residual"];
        extras_names.extend_from_slice(extra_names);
        let drift = std::cell::Cell::new(false);
        let (next, res) = train(
            &body,
            &phase,
            &sphere,
            &extras_names,
            |b, g| {
                let model = MfsModel::fit(b, n, eps, mfs)?;
                loss(b, &model, g)
            },
            |b| {
                let model = MfsModel::fit(b, n, eps, mfs)?;
                if model.residual > restart_factor * mfs.tol {
                    drift.set(true);
                }
                let mut row = vec![model.residual];
                row.extend(extras(b)?);
                Ok(row)
            },
        )?;
        drifted |= drift.get();
        body = next;
        merged = Some(match merged {
            None => res,
            Some(prev) => {
                let mut log = prev.log;
                let off = prev.iterations;
                let ev = prev.evaluations;
                log.rows.extend(res.log.rows.iter().skip(1).cloned().map(|mut r| {
                    r.iter += off;
                    r.evaluations += ev;
                    r
                }));
                OptimizeResult { iterations: off + res.iterations, evaluations: ev + res.evaluations, log, ..res }
            }
        });
        if !drifted || restarts >= max_restarts || remaining == 0 {
            break;
        }
        restarts += 1;
        log::info!("mfs residual drifted above tolerance, re-adapting (restart {restarts})");
    }
    let model = solve_torsion_mfs(&body, mfs)?;
    Ok((body, merged.expect("at least one phase"), model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Volume,
    Perimeter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorsionGradientSpec {
    pub train: TrainSpec,
    pub kind: Kind,
    pub normalization: Normalization,
    pub x_star: Vec<f64>,
    pub mfs: MfsConfig,
    pub max_restarts: usize,
}

/// Maximises `J_Vol` or `J_Per` (the optimizer minimises `−J`).
pub fn run_torsion_gradient(spec: &TorsionGradientSpec) -> Result<RunOutput> {
    let start = Instant::now();
    let d = spec.train.d;
    if spec.x_star.len() != d {
        return Err(Error::Domain("x_star must have d coordinates".into()));
    }
    let nrm = spec.x_star.iter().map(|v| v * v).sum::<f64>().sqrt();
    let x_star: Vec<f64> = spec.x_star.iter().map(|v| v / nrm).collect();
    let (sphere, ball) = spec.train.quad.rules(d)?;
    let body0 = ConvexBody::new(spec.train.net.build(d, &sphere)?, spec.kind);
    let (body, res, model) = train_with_mfs(
        &body0,
        &spec.train,
        &spec.mfs,
        10.0,
        spec.max_restarts,
        &[],
        |b, model, g| {
            let t = torsion_gradient_objectives(b, model, &x_star, &ball, true)?;
            let (j, gj) = match spec.normalization {
                Normalization::Volume => (t.j_vol, t.grad_vol),
                Normalization::Perimeter => (t.j_per, t.grad_per),
            };
            for (a, v) in g.iter_mut().zip(gj.expect("gradient requested")) {
                *a -= v;
            }
            Ok(scale_anchor(b, &ball, g)? - j)
        },
        |_| Ok(vec![]),
    )?;
    let t = torsion_gradient_objectives(&body, &model, &x_star, &ball, false)?;
    let mut m = MetricsReport::new();
    m.set("j_vol", t.j_vol);
    m.set("j_per", t.j_per);
    m.set("normal_derivative", t.normal_derivative);
    m.set("mfs_residual", model.residual);
    m.set("mfs_sources", model.n_sources() as f64);
    shape_metrics(&mut m, &body, &sphere, &ball)?;
    finish(&mut m, &res, start, spec.train.record_timing);
    Ok(RunOutput {
        metrics: m,
        log: Some(res.log),
        net: Some(NetArtifact { net: body.f, kind: spec.kind }),
        tables: vec![],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaintVenantSpec {
    pub train: TrainSpec,
    pub kind: Kind,
    pub mfs: MfsConfig,
    pub max_restarts: usize,
}

/// Maximises `T / Vol^{(d+2)/d}`; the ball is the maximiser.
pub fn run_saint_venant(spec: &SaintVenantSpec) -> Result<RunOutput> {
    let start = Instant::now();
    let d = spec.train.d;
    let (sphere, ball) = spec.train.quad.rules(d)?;
    let body0 = ConvexBody::new(spec.train.net.build(d, &sphere)?, spec.kind);
    let (body, res, model) = train_with_mfs(
        &body0,
        &spec.train,
        &spec.mfs,
        10.0,
        spec.max_restarts,
        &["deficit"],
        |b, model, g| {
            let mut gr = vec![0.0; g.len()];
            let r = saint_venant_ratio(b, model, &ball, Some(&mut gr))?;
            for (a, v) in g.iter_mut().zip(&gr) {
                *a -= v;
            }
            Ok(scale_anchor(b, &ball, g)? - r)
        },
        |b| Ok(vec![isoperimetric_deficit(b, &ball)?]),
    )?;
    let ratio = saint_venant_ratio(&body, &model, &ball, None)?;
    let mut m = MetricsReport::new();
    m.set("ratio", ratio);
    m.set("ratio_ball", saint_venant_ball(d));
    m.set("torsion", model.torsional_rigidity(&body, &ball)?);
    m.set("mfs_residual", model.residual);
    shape_metrics(&mut m, &body, &sphere, &ball)?;
    finish(&mut m, &res, start, spec.train.record_timing);
    Ok(RunOutput {
        metrics: m,
        log: Some(res.log),
        net: Some(NetArtifact { net: body.f, kind: spec.kind }),
        tables: vec![],
    })
}

// ---------------------------------------------------------------------------
// Minkowski problem

#[derive(Debug, Clone, PartialEq)]
pub enum CurvatureTarget {
    Ellipsoid(Vec<f64>),
    /// Expression in the normal coordinates `x1 … xd`.
    Expr(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiSpec {
    pub train: TrainSpec,
    pub target: CurvatureTarget,
}

/// Prescribed Gauss curvature as a function of the unit normal.
type CurvatureFn = Box<dyn Fn(&[f64]) -> f64 + Sync>;

pub fn run_minkowski(spec: &MinkowskiSpec) -> Result<RunOutput> {
    let start = Instant::now();
    let d = spec.train.d;
    let (sphere, ball) = spec.train.quad.rules(d)?;
    let g: CurvatureFn = match &spec.target {
        CurvatureTarget::Ellipsoid(a) => {
            if a.len() != d {
                return Err(Error::Domain(format!("ellipsoid has {} axes but d = {d}", a.len())));
            }
            let a = a.clone();
            Box::new(move |u: &[f64]| ellipsoid_curvature(&a)(u))
        }
        CurvatureTarget::Expr(src) => {
            let e = Expr::parse(src)?;
            Box::new(move |u: &[f64]| e.eval(u))
        }
    };
    let body0 = ConvexBody::support(spec.train.net.build(d, &sphere)?);
    let (body, res) = train(
        &body0,
        &spec.train,
        &sphere,
        &["relative_error"],
        |b, grad| minkowski_loss(b, &g, &sphere, Some(grad)),
        |b| Ok(vec![minkowski_relative_error(minkowski_loss(b, &g, &sphere, None)?, d)]),
    )?;
    let loss = minkowski_loss(&body, &g, &sphere, None)?;
    let mut m = MetricsReport::new();
    m.set("loss", loss);
    m.set("relative_error", minkowski_relative_error(loss, d));
    // solvability: ∫ u / g(u) du should vanish
    let drift: Vec<f64> =
        (0..d).map(|k| sphere.nodes.iter().zip(&sphere.weights).map(|(u, w)| w * u[k] / g(u)).sum::<f64>()).collect();
    m.set("solvability_residual", drift.iter().map(|v| v * v).sum::<f64>().sqrt() / sphere_area(d));
    if let CurvatureTarget::Ellipsoid(a) = &spec.target {
        let exact = ConvexBody::support(Quadratic::ellipsoid_support(a));
        m.set("hausdorff", body.hausdorff_estimate(&exact, 4 * spec.train.quad.sphere)?.value);
    }
    shape_metrics(&mut m, &body, &sphere, &ball)?;
    finish(&mut m, &res, start, spec.train.record_timing);
    Ok(RunOutput {
        metrics: m,
        log: Some(res.log),
        net: Some(NetArtifact { net: body.f, kind: Kind::Support }),
        tables: vec![],
    })
}

// ---------------------------------------------------------------------------
// Mahler volume

#[derive(Debug, Clone, PartialEq)]
pub struct MahlerSpec {
    /// `train.net.symmetry` holds the fold `n`.
    pub train: TrainSpec,
    /// Independent initialisations with seeds `net.seed + k`; the lowest
    /// final value wins.
    pub starts: usize,
}

pub fn run_mahler(spec: &MahlerSpec) -> Result<RunOutput> {
    let start = Instant::now();
    let d = spec.train.d;
    if spec.starts == 0 {
        return Err(Error::Domain("mahler needs at least one start".into()));
    }
    let (sphere, ball) = spec.train.quad.rules(d)?;
    let mut best: Option<(f64, Body, OptimizeResult)> = None;
    for k in 0..spec.starts {
        let mut net = spec.train.net.clone();
        net.seed += k as u64;
        let body0 = ConvexBody::gauge(net.build(d, &sphere)?);
        let (body, res) = train(
            &body0,
            &spec.train,
            &sphere,
            &[],
            |b, g| Ok(mahler_volume(&b.f, &ball, Some(g))? + scale_anchor(b, &ball, g)?),
            |_| Ok(vec![]),
        )?;
        let mv = mahler_volume(&body.f, &ball, None)?;
        log::info!("start {k} (seed {}): mahler {mv:.9}", net.seed);
        if best.as_ref().is_none_or(|(v, _, _)| mv < *v) {
            best = Some((mv, body, res));
        }
    }
    let (mv, body, res) = best.expect("at least one start");
    let mut m = MetricsReport::new();
    m.set("mahler", mv);
    m.set("starts", spec.starts as f64);
    if let (2, Some(n)) = (d, spec.train.net.symmetry) {
        if n >= 3 {
            let target = regular_polygon_mahler(n);
            m.set("mahler_polygon", target);
            m.set("relative_gap", mv / target - 1.0);
        }
    }
    m.set("mahler_ball", ball_volume(d).powi(2));
    shape_metrics(&mut m, &body, &sphere, &ball)?;
    finish(&mut m, &res, start, spec.train.record_timing);
    Ok(RunOutput {
        metrics: m,
        log: Some(res.log),
        net: Some(NetArtifact { net: body.f, kind: Kind::Gauge }),
        tables: vec![],
    })
}

// ---------------------------------------------------------------------------
// checks without optimisation

#[derive(Debug, Clone, PartialEq)]
pub struct UatSpec {
    pub d: usize,
    pub polytope: Target,
    pub kind: Kind,
    pub betas: Vec<f64>,
    pub samples: usize,
}

/// Polytope approximation sweep. The polytope rows are facet normals for a
/// gauge and vertices for a support function.
pub fn run_uat_check(spec: &UatSpec) -> Result<RunOutput> {
    let rows = match spec.polytope.gauge(spec.d)?.f {
        Analytic::Polytope(p) => p.rows,
        Analytic::Quadratic(_) => return Err(Error::Domain("uat-check needs a polytope target".into())),
    };
    let table = uat_harness(&rows, spec.kind, &spec.betas, spec.samples)?;
    let mut csv = String::from("beta,max_gap,gap_bound,hausdorff,hausdorff_bound\n");
    let mut m = MetricsReport::new();
    for r in &table {
        let _ = writeln!(
            csv,
            "{},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.beta, r.max_gap, r.gap_bound, r.hausdorff, r.hausdorff_bound
        );
        m.set(&format!("beta={}.max_gap", r.beta), r.max_gap);
        m.set(&format!("beta={}.hausdorff", r.beta), r.hausdorff);
    }
    let gap_ok = table.iter().all(|r| r.max_gap <= r.gap_bound);
    let mut by_beta = table.clone();
    by_beta.sort_by(|a, b| b.beta.total_cmp(&a.beta));
    let decreasing = by_beta.windows(2).all(|w| w[1].hausdorff < w[0].hausdorff);
    m.set("gap_bound_holds", if gap_ok { 1.0 } else { 0.0 });
    m.set("hausdorff_decreasing", if decreasing { 1.0 } else { 0.0 });
    Ok(RunOutput { metrics: m, log: None, net: None, tables: vec![("uat.csv".into(), csv)] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeSolver {
    Mfs,
    Galerkin,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeCheckSpec {
    pub d: usize,
    pub body: Target,
    pub kind: Kind,
    pub solver: PdeSolver,
    pub mfs: MfsConfig,
    pub galerkin: GalerkinConfig,
    pub quad: QuadSpec,
}

/// Torsion problem on an analytic body: rigidity, normal derivative at `e₁`
/// and the error against the closed form where available.
pub fn run_pde_check(spec: &PdeCheckSpec) -> Result<RunOutput> {
    let d = spec.d;
    let (sphere, ball) = spec.quad.rules(d)?;
    let g = spec.body.gauge(d)?;
    // the same body in the requested role: gauge directly, or support of the polar
    let body = match spec.kind {
        Kind::Gauge => g.clone(),
        Kind::Support => match &spec.body {
            Target::Ball(r) => ConvexBody::support(Analytic::Quadratic(Quadratic::ball(d, *r))),
            Target::Ellipsoid(a) => ConvexBody::support(Analytic::Quadratic(Quadratic::ellipsoid_support(a))),
            _ => return Err(Error::Unsupported("pde-check with support kind needs a smooth target".into())),
        },
    };
    let exact = spec.body.torsion_exact(d);
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let mut m = MetricsReport::new();
    let mut tables = Vec::new();
    if let Some(t) = exact {
        m.set("torsion_exact", t);
    }
    if matches!(spec.body, Target::Ball(_)) {
        if let Target::Ball(r) = spec.body {
            m.set("normal_derivative_exact", -r / d as f64);
        }
    }
    if matches!(spec.solver, PdeSolver::Mfs | PdeSolver::Both) {
        let model = match solve_torsion_mfs(&body, &spec.mfs) {
            Ok(model) => model,
            Err(Error::MfsConvergence { residual, tol, best }) => {
                log::warn!("mfs stalled at residual {residual:e} (tolerance {tol:e}); reporting the best fit");
                *best
            }
            Err(e) => return Err(e),
        };
        let t = model.torsional_rigidity(&body, &ball)?;
        m.set("mfs.torsion", t);
        m.set("mfs.residual", model.residual);
        m.set("mfs.sources", model.n_sources() as f64);
        m.set("mfs.normal_derivative", model.torsion_normal_derivative(&body, &e1)?);
        if let Some(te) = exact {
            m.set("mfs.torsion_error", (t - te).abs());
        }
        tables.push(("solution_mfs.csv".into(), sample_csv(&PdeSolution::Mfs(model), &body, 16, 64)?));
    }
    if matches!(spec.solver, PdeSolver::Galerkin | PdeSolver::Both) {
        let one = Expr::parse("1")?;
        let sol = solve_galerkin(&body, &one, &spec.galerkin)?;
        m.set("galerkin.torsion", sol.objective);
        if let Some(te) = exact {
            m.set("galerkin.torsion_rel_error", (sol.objective - te).abs() / te);
        }
        tables.push(("solution_galerkin.csv".into(), sample_csv(&PdeSolution::Galerkin(sol), &body, 16, 64)?));
    }
    m.set("volume", body.volume(&ball)?);
    m.set("perimeter", body.surface_area(&sphere)?);
    Ok(RunOutput { metrics: m, log: None, net: None, tables })
}
