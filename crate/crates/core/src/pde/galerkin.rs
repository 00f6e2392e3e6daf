//! Penalty Galerkin solver for `−Δu = f` in `Ω`, `u = 0` on `∂Ω`, posed on the
//! reference ball through the boundary map. The trial space is compactly
//! supported Wendland C⁴ bumps plus affine functions.

use nalgebra::{DMatrix, DVector};

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{integrate_functional, jacobian_point, map_point, ConvexBody, Kind, LocalJet, PointFunctional};
use crate::linalg;
use crate::quadrature::{ball_rule, ball_volume, sphere_area, sphere_rule, BallRule};
use crate::sublinear::Sublinear;

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinConfig {
    pub n_centers: usize,
    /// Support radius as a multiple of the mean nearest-centre spacing.
    pub support_factor: f64,
    /// Boundary penalty `α ∫_{∂B} u v` with `α = penalty / ρ`.
    pub penalty: f64,
    /// Angular and radial quadrature sizes; `None` picks a default per dimension.
    pub sphere_nodes: Option<usize>,
    pub radial_nodes: Option<usize>,
}

impl Default for GalerkinConfig {
    fn default() -> Self {
        GalerkinConfig { n_centers: 300, support_factor: 8.0, penalty: 1e3, sphere_nodes: None, radial_nodes: None }
    }
}

impl GalerkinConfig {
    /// Default centre count per dimension.
    pub fn for_dim(d: usize) -> Self {
        let n_centers = match d {
            2 => 300,
            _ => 1200,
        };
        GalerkinConfig { n_centers, ..Default::default() }
    }

    pub fn quadrature(&self, d: usize) -> Result<BallRule> {
        let (ns, nr) = match d {
            2 => (384, 24),
            3 => (1536, 14),
            _ => (3072, 10),
        };
        let s = sphere_rule(d, self.sphere_nodes.unwrap_or(ns))?;
        ball_rule(d, self.radial_nodes.unwrap_or(nr), &s)
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// The first `n` Halton points (bases 2, 3, 5, 7) of `[−1, 1]ᵈ` that fall in
/// the ball of radius `radius`.
pub fn halton_ball_centers(d: usize, n: usize, radius: f64) -> Vec<Vec<f64>> {
    const BASES: [usize; 4] = [2, 3, 5, 7];
    let mut out = Vec::with_capacity(n);
    let mut i = 1;
    while out.len() < n {
        let p: Vec<f64> = (0..d).map(|k| 2.0 * radical_inverse(i, BASES[k]) - 1.0).collect();
        if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            out.push(p.iter().map(|v| v * radius).collect());
        }
        i += 1;
    }
    out
}

/// Wendland C⁴ profile `(1−s)⁶(35s² + 18s + 3)` and `ψ'(s)/s`.
fn wendland(s: f64) -> (f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let t = 1.0 - s;
    let t5 = t.powi(5);
    (t5 * t * (35.0 * s * s + 18.0 * s + 3.0), -56.0 * t5 * (5.0 * s + 1.0))
}

/// Compactly supported radial functions on the reference ball plus `1, x₁, …, x_d`.
#[derive(Debug, Clone)]
pub struct RbfBasis {
    pub d: usize,
    pub centers: Vec<Vec<f64>>,
    pub rho: f64,
}

impl RbfBasis {
    /// `n` centres: Halton points inside the ball and a ring on the sphere, split
    /// so that both have the spacing `h` with `|B|/hᵈ + |S|/hᵈ⁻¹ = n`.
    pub fn new(d: usize, n: usize, support_factor: f64) -> Result<Self> {
        if !(2..=4).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if n < 16 || support_factor <= 0.0 {
            return Err(Error::Domain("Galerkin basis needs at least 16 centres and a positive support factor".into()));
        }
        let (vol, area) = (ball_volume(d), sphere_area(d));
        let count = |h: f64| vol / h.powi(d as i32) + area / h.powi(d as i32 - 1);
        let (mut lo, mut hi) = (1e-4, 10.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if count(mid) > n as f64 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = 0.5 * (lo + hi);
        let nb = ((area / h.powi(d as i32 - 1)).round() as usize).clamp(8, n - 8);
        let mut centers = halton_ball_centers(d, n - nb, 1.0 - 0.5 * h);
        centers.extend(sphere_rule(d, nb)?.nodes);
        let mut spacing = 0.0;
        for (i, a) in centers.iter().enumerate() {
            let mut best = f64::INFINITY;
            for (j, b) in centers.iter().enumerate() {
                if i != j {
                    best = best.min(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>());
                }
            }
            spacing += best.sqrt();
        }
        let rho = support_factor * spacing / centers.len() as f64;
        Ok(RbfBasis { d, centers, rho })
    }

    pub fn len(&self) -> usize {
        self.centers.len() + self.d + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Calls `f(index, value, gradient)` for every basis function not vanishing at `x`.
    pub fn for_each_active(&self, x: &[f64], mut f: impl FnMut(usize, f64, &[f64])) {
        let d = self.d;
        let mut g = vec![0.0; d];
        let inv = 1.0 / self.rho;
        for (i, c) in self.centers.iter().enumerate() {
            let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            let s = r2.sqrt() * inv;
            if s >= 1.0 {
                continue;
            }
            let (v, dv) = wendland(s);
            for k in 0..d {
                g[k] = dv * (x[k] - c[k]) * inv * inv;
            }
            f(i, v, &g);
        }
        let n = self.centers.len();
        g.iter_mut().for_each(|v| *v = 0.0);
        f(n, 1.0, &g);
        for k in 0..d {
            g[k] = 1.0;
            f(n + 1 + k, x[k], &g);
            g[k] = 0.0;
        }
    }

    pub fn value(&self, coeffs: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each_active(x, |i, v, _| s += coeffs[i] * v);
        s
    }

    pub fn value_grad(&self, coeffs: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
        let mut s = 0.0;
        let mut g = vec![0.0; self.d];
        self.for_each_active(x, |i, v, dv| {
            s += coeffs[i] * v;
            for (a, b) in g.iter_mut().zip(dv) {
                *a += coeffs[i] * b;
            }
        });
        (s, g)
    }
}

/// Assembled penalty system `K a = ℓ` plus the objective weights `b`
/// (`∫_Ω u = bᵀa`).
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    pub basis: RbfBasis,
    pub rule: BallRule,
    pub stiffness: DMatrix<f64>,
    pub load: DVector<f64>,
    pub objective_weights: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct GalerkinSolution {
    pub basis: RbfBasis,
    pub coeffs: Vec<f64>,
    /// `∫_Ω u`.
    pub objective: f64,
}

impl GalerkinSolution {
    /// `u(φ(x))` at a reference-ball point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.basis.value(&self.coeffs, x)
    }
}

struct RayData {
    jac: f64,
    /// `Jac · J⁻¹ J⁻ᵀ`.
    a: Vec<f64>,
    y: Vec<f64>,
}

fn ray_data<F: Sublinear + Clone>(body: &ConvexBody<F>, u: &[f64]) -> Result<RayData> {
    let d = body.dim();
    let jet = LocalJet::from_taylor(u, &body.f.taylor(u, body.kind.frame_order()));
    let jm = jacobian_point(body.kind, &jet);
    let jac = linalg::det(&jm, d).abs();
    let jinv = linalg::inverse(&jm, d)
        .filter(|_| jac > 1e-12 && jac.is_finite())
        .ok_or_else(|| Error::DegenerateMap { point: u.to_vec(), det: jac })?;
    Ok(RayData { jac, a: conductivity(&jinv, jac, d), y: map_point(body.kind, &jet) })
}

fn conductivity<T: Real>(jinv: &[T], jac: T, d: usize) -> Vec<T> {
    let mut a = vec![T::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s = T::zero();
            for k in 0..d {
                s += jinv[i * d + k] * jinv[j * d + k];
            }
            a[i * d + j] = s * jac;
        }
    }
    a
}

pub fn assemble_galerkin<F: Sublinear + Clone>(
    body: &ConvexBody<F>,
    source: &Expr,
    cfg: &GalerkinConfig,
) -> Result<GalerkinSystem> {
    let d = body.dim();
    if cfg.penalty <= 0.0 {
        return Err(Error::Domain("penalty must be positive".into()));
    }
    if source.arity() > d {
        return Err(Error::Domain(format!("source term uses {} coordinates in dimension {d}", source.arity())));
    }
    let basis = RbfBasis::new(d, cfg.n_centers, cfg.support_factor)?;
    let rule = cfg.quadrature(d)?;
    let nb = basis.len();
    let mut k = DMatrix::<f64>::zeros(nb, nb);
    let mut load = DVector::<f64>::zeros(nb);
    let mut bw = DVector::<f64>::zeros(nb);
    let mut active: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    let mut ag = vec![0.0; d];
    for (u, ws) in rule.sphere.nodes.iter().zip(&rule.sphere.weights) {
        let ray = ray_data(body, u)?;
        for &(r, wr) in &rule.radial {
            let x: Vec<f64> = u.iter().map(|c| r * c).collect();
            let y: Vec<f64> = ray.y.iter().map(|c| r * c).collect();
            let w = ws * wr;
            let fv = source.eval(&y);
            active.clear();
            basis.for_each_active(&x, |i, v, g| active.push((i, v, g.to_vec())));
            for (i, vi, gi) in &active {
                load[*i] += w * ray.jac * fv * vi;
                bw[*i] += w * ray.jac * vi;
                for a in 0..d {
                    ag[a] = (0..d).map(|b| ray.a[a * d + b] * gi[b]).sum();
                }
                for (j, _, gj) in &active {
                    if j < i {
                        continue;
                    }
                    let v: f64 = ag.iter().zip(gj).map(|(p, q)| p * q).sum();
                    k[(*i, *j)] += w * v;
                }
            }
        }
    }
    let alpha = cfg.penalty / basis.rho;
    for (u, ws) in rule.sphere.nodes.iter().zip(&rule.sphere.weights) {
        active.clear();
        basis.for_each_active(u, |i, v, _| active.push((i, v, Vec::new())));
        for (i, vi, _) in &active {
            for (j, vj, _) in &active {
                if j >= i {
                    k[(*i, *j)] += alpha * ws * vi * vj;
                }
            }
        }
    }
    for i in 0..nb {
        for j in 0..i {
            k[(i, j)] = k[(j, i)];
        }
    }
    Ok(GalerkinSystem { basis, rule, stiffness: k, load, objective_weights: bw })
}

fn cholesky_solve(k: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let ch = k
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("Galerkin matrix is not numerically positive definite".into()))?;
    Ok(ch.solve(rhs))
}

pub fn solve_galerkin<F: Sublinear + Clone>(
    body: &ConvexBody<F>,
    source: &Expr,
    cfg: &GalerkinConfig,
) -> Result<GalerkinSolution> {
    let sys = assemble_galerkin(body, source, cfg)?;
    let a = cholesky_solve(&sys.stiffness, &sys.load)?;
    let objective = sys.objective_weights.dot(&a);
    Ok(GalerkinSolution { basis: sys.basis, coeffs: a.iter().copied().collect(), objective })
}

/// `J = ∫_Ω u` for `−Δu = f`, `u|∂Ω = 0`, and optionally `∂J/∂θ` via the adjoint
/// of the discrete system (added into `grad`).
pub fn poisson_objective<F: Sublinear + Clone>(
    body: &ConvexBody<F>,
    source: &Expr,
    cfg: &GalerkinConfig,
    grad: Option<&mut [f64]>,
) -> Result<GalerkinSolution> {
    let sys = assemble_galerkin(body, source, cfg)?;
    let a = cholesky_solve(&sys.stiffness, &sys.load)?;
    let objective = sys.objective_weights.dot(&a);
    let coeffs: Vec<f64> = a.iter().copied().collect();
    if let Some(grad) = grad {
        let lam: Vec<f64> = cholesky_solve(&sys.stiffness, &sys.objective_weights)?.iter().copied().collect();
        let mut frozen = Vec::with_capacity(sys.rule.nodes.len());
        for x in &sys.rule.nodes {
            let (u, gu) = sys.basis.value_grad(&coeffs, x);
            let (l, gl) = sys.basis.value_grad(&lam, x);
            frozen.push(Frozen { u, gu, l, gl });
        }
        let func = AdjointFunctional {
            kind: body.kind,
            source,
            radial: &sys.rule.radial,
            ns: sys.rule.sphere.nodes.len(),
            frozen,
        };
        integrate_functional(&body.f, &sys.rule.sphere.nodes, &sys.rule.sphere.weights, &func, Some(grad))?;
    }
    Ok(GalerkinSolution { basis: sys.basis, coeffs, objective })
}

struct Frozen {
    u: f64,
    gu: Vec<f64>,
    l: f64,
    gl: Vec<f64>,
}

/// Per-ray Lagrangian `Σ_r w_r (Jac û + Jac f(φ) λ̂ − ∇λ̂ᵀ A ∇û)` with the
/// discrete state and adjoint frozen.
struct AdjointFunctional<'a> {
    kind: Kind,
    source: &'a Expr,
    radial: &'a [(f64, f64)],
    ns: usize,
    frozen: Vec<Frozen>,
}

impl PointFunctional for AdjointFunctional<'_> {
    fn order(&self) -> usize {
        self.kind.frame_order()
    }

    fn eval<T: Real>(&self, node: usize, _: &[f64], jet: &LocalJet<T>) -> T {
        let d = jet.d;
        let y1 = map_point(self.kind, jet);
        let jm = jacobian_point(self.kind, jet);
        let jac = linalg::det(&jm, d).abs();
        let jinv = linalg::inverse(&jm, d).unwrap_or_else(|| vec![T::from_f64(f64::NAN); d * d]);
        let a = conductivity(&jinv, jac, d);
        let mut total = T::zero();
        for (k, &(r, wr)) in self.radial.iter().enumerate() {
            let fz = &self.frozen[k * self.ns + node];
            let y: Vec<T> = y1.iter().map(|&c| c * r).collect();
            let mut flux = T::zero();
            for i in 0..d {
                for j in 0..d {
                    flux += a[i * d + j] * (fz.gl[i] * fz.gu[j]);
                }
            }
            let term = jac * (self.source.eval(&y) * fz.l + fz.u) - flux;
            total += term * wr;
        }
        total
    }
}
