//! Convex bodies parametrized by a sublinear function: boundary maps from the
//! unit ball, Jacobians, normals, curvature and pulled-back integrals.
//!
//! A gauge body with function `p` is `{p ≤ 1}` and is reached from the unit
//! ball by `φ(x) = ‖x‖ x / p(x)`; a support body has support function `p` and
//! is reached by `φ(x) = ‖x‖ ∇p(x)`. Everything pointwise is written once over
//! a [`LocalJet`] so it can run on plain values or on multi-tangent duals
//! whose tangents are the local Taylor coefficients of `p`.

use rayon::prelude::*;

use crate::autodiff::{norm, Coeffs, Dual, MultiDual, Real, ScalarField, Taylor, VectorField, MAX_COEFFS};
use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature::{sphere_rule, BallRule, SphereRule};
use crate::sublinear::Sublinear;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Gauge,
    Support,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Gauge => "gauge",
            Kind::Support => "support",
        }
    }

    pub fn parse(s: &str) -> crate::error::Result<Kind> {
        match s.trim() {
            "gauge" => Ok(Kind::Gauge),
            "support" => Ok(Kind::Support),
            other => Err(crate::error::Error::Parse(format!("unknown body kind `{other}` (gauge or support)"))),
        }
    }

    pub fn flip(self) -> Kind {
        match self {
            Kind::Gauge => Kind::Support,
            Kind::Support => Kind::Gauge,
        }
    }

    /// Jet order of `p` needed for the boundary map itself.
    pub fn map_order(self) -> usize {
        match self {
            Kind::Gauge => 0,
            Kind::Support => 1,
        }
    }

    pub fn frame_order(self) -> usize {
        self.map_order() + 1
    }

    pub fn curvature_order(self) -> usize {
        self.map_order() + 2
    }
}

/// Position and derivative tensors of `p` at one point.
#[derive(Debug, Clone)]
pub struct LocalJet<T> {
    pub d: usize,
    pub order: usize,
    pub x: Vec<T>,
    pub p: T,
    pub g: Vec<T>,
    pub h: Vec<T>,
    pub t: Vec<T>,
}

impl<T: Real> LocalJet<T> {
    fn build(x: Vec<T>, tay: &Taylor, entry: impl Fn(usize, f64) -> T) -> Self {
        let d = tay.dim;
        let space = tay.space();
        let idx = |ids: &[usize]| {
            let mut e = [0u8; 4];
            for &a in ids {
                e[a] += 1;
            }
            space.index(&e).unwrap()
        };
        let at = |ids: &[usize]| {
            let k = idx(ids);
            entry(k, space.factorials[k])
        };
        let p = at(&[]);
        let g = if tay.order >= 1 { (0..d).map(|a| at(&[a])).collect() } else { Vec::new() };
        let mut h = Vec::new();
        if tay.order >= 2 {
            for a in 0..d {
                for b in 0..d {
                    h.push(at(&[a, b]));
                }
            }
        }
        let mut t = Vec::new();
        if tay.order >= 3 {
            for a in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        t.push(at(&[a, b, c]));
                    }
                }
            }
        }
        LocalJet { d, order: tay.order, x, p, g, h, t }
    }

    /// The jet of `p` at `x + ε e_c`, one order lower, as dual numbers.
    pub fn shift(&self, c: usize) -> LocalJet<Dual<T>> {
        let d = self.d;
        assert!(self.order >= 1, "cannot shift an order-0 jet");
        let x = (0..d).map(|a| Dual::new(self.x[a], if a == c { T::one() } else { T::zero() })).collect();
        let p = Dual::new(self.p, self.g[c]);
        let g = if self.order >= 2 {
            (0..d).map(|a| Dual::new(self.g[a], self.h[a * d + c])).collect()
        } else {
            Vec::new()
        };
        let h = if self.order >= 3 {
            (0..d * d).map(|ab| Dual::new(self.h[ab], self.t[ab * d + c])).collect()
        } else {
            Vec::new()
        };
        LocalJet { d, order: self.order - 1, x, p, g, h, t: Vec::new() }
    }
}

impl LocalJet<f64> {
    pub fn from_taylor(x: &[f64], tay: &Taylor) -> Self {
        Self::build(x.to_vec(), tay, |k, fact| tay.c[k] * fact)
    }
}

impl LocalJet<MultiDual> {
    /// Seeds every Taylor coefficient of `p` as an independent input.
    pub fn seeded(x: &[f64], tay: &Taylor) -> Self {
        let n = tay.space().len();
        let xs = x.iter().map(|&v| MultiDual::constant(v)).collect();
        Self::build(xs, tay, |k, fact| MultiDual::input(tay.c[k], k, n) * fact)
    }
}

/// `φ(x)`.
pub fn map_point<T: Real>(kind: Kind, j: &LocalJet<T>) -> Vec<T> {
    let r = norm(&j.x);
    match kind {
        Kind::Gauge => {
            let s = r / j.p;
            j.x.iter().map(|&a| a * s).collect()
        }
        Kind::Support => j.g.iter().map(|&a| a * r).collect(),
    }
}

/// `Dφ(x)`, row-major.
pub fn jacobian_point<T: Real>(kind: Kind, j: &LocalJet<T>) -> Vec<T> {
    let d = j.d;
    let r = norm(&j.x);
    let u: Vec<T> = j.x.iter().map(|&a| a / r).collect();
    let mut m = vec![T::zero(); d * d];
    match kind {
        Kind::Gauge => {
            let ip = j.p.recip();
            let rp2 = r * ip * ip;
            for a in 0..d {
                for b in 0..d {
                    let mut v = u[b] * j.x[a] * ip - rp2 * j.x[a] * j.g[b];
                    if a == b {
                        v += r * ip;
                    }
                    m[a * d + b] = v;
                }
            }
        }
        Kind::Support => {
            for a in 0..d {
                for b in 0..d {
                    m[a * d + b] = u[b] * j.g[a] + r * j.h[a * d + b];
                }
            }
        }
    }
    m
}

/// Extended unit normal `ñ(x) = J⁻ᵀx / ‖J⁻ᵀx‖`, the outward normal at `φ(x)`.
pub fn normal_point<T: Real>(kind: Kind, j: &LocalJet<T>) -> Vec<T> {
    let d = j.d;
    let jm = jacobian_point(kind, j);
    let jt = linalg::transpose(&jm, d);
    let v = linalg::solve(&jt, &j.x, d).unwrap_or_else(|| vec![T::from_f64(f64::NAN); d]);
    let n = norm(&v);
    v.iter().map(|&a| a / n).collect()
}

/// Pointwise frame quantities.
#[derive(Debug, Clone)]
pub struct FramePoint<T> {
    pub y: Vec<T>,
    pub jmat: Vec<T>,
    pub jac: T,
    pub surf_jac: T,
    pub n: Vec<T>,
}

pub fn frame_point<T: Real>(kind: Kind, j: &LocalJet<T>) -> FramePoint<T> {
    let d = j.d;
    let y = map_point(kind, j);
    let jmat = jacobian_point(kind, j);
    let jac = linalg::det(&jmat, d).abs();
    let r = norm(&j.x);
    let xb: Vec<T> = j.x.iter().map(|&a| a / r).collect();
    let jt = linalg::transpose(&jmat, d);
    let v = linalg::solve(&jt, &xb, d).unwrap_or_else(|| vec![T::from_f64(f64::NAN); d]);
    let nv = norm(&v);
    let n = v.iter().map(|&a| a / nv).collect();
    FramePoint { y, jmat, jac, surf_jac: jac * nv, n }
}

/// `|det Dφ(x)|`.
pub fn jac_point<T: Real>(kind: Kind, j: &LocalJet<T>) -> T {
    linalg::det(&jacobian_point(kind, j), j.d).abs()
}

/// Tangent basis rows of the Householder reflection sending `n` to `±e_d`.
fn tangent_rows<T: Real>(n: &[T]) -> Vec<Vec<T>> {
    let d = n.len();
    let mut v: Vec<T> = n.to_vec();
    let dist = {
        let mut s = 0.0;
        for (k, a) in n.iter().enumerate() {
            let e = if k == d - 1 { 1.0 } else { 0.0 };
            s += (a.value() - e).powi(2);
        }
        s.sqrt()
    };
    if dist < 1e-6 {
        v[d - 1] = v[d - 1] + 1.0;
    } else {
        v[d - 1] = v[d - 1] - 1.0;
    }
    let vn = norm(&v);
    let v: Vec<T> = v.iter().map(|&a| a / vn).collect();
    (0..d - 1)
        .map(|i| {
            (0..d)
                .map(|k| {
                    let e = if i == k { T::one() } else { T::zero() };
                    e - v[i] * v[k] * 2.0
                })
                .collect()
        })
        .collect()
}

/// Shape operator in the tangent basis, `(d−1) × (d−1)` row-major.
pub fn weingarten_point<T: Real>(kind: Kind, j: &LocalJet<T>) -> Vec<T> {
    let d = j.d;
    let jm = jacobian_point(kind, j);
    let jinv = linalg::inverse(&jm, d).unwrap_or_else(|| vec![T::from_f64(f64::NAN); d * d]);
    let n = normal_point(kind, j);
    let mut dn_tilde = vec![T::zero(); d * d];
    for c in 0..d {
        let nc = normal_point(kind, &j.shift(c));
        for a in 0..d {
            dn_tilde[a * d + c] = nc[a].eps;
        }
    }
    let dn = linalg::matmul(&dn_tilde, &jinv, d);
    let rows = tangent_rows(&n);
    let k = d - 1;
    let mut s = vec![T::zero(); k * k];
    for i in 0..k {
        let dt: Vec<T> = (0..d)
            .map(|a| {
                let mut acc = T::zero();
                for b in 0..d {
                    acc += dn[a * d + b] * rows[i][b];
                }
                acc
            })
            .collect();
        for (jj, row) in rows.iter().enumerate() {
            let mut acc = T::zero();
            for a in 0..d {
                acc += row[a] * dt[a];
            }
            s[jj * k + i] = acc;
        }
    }
    s
}

/// `(H, κ)`: mean curvature `tr S/(d−1)` and Gauss–Kronecker curvature `det S`.
pub fn curvatures_point<T: Real>(kind: Kind, j: &LocalJet<T>) -> (T, T) {
    let k = j.d - 1;
    let s = weingarten_point(kind, j);
    (linalg::trace(&s, k) / k as f64, linalg::det(&s, k))
}

/// A scalar quantity evaluated from the local jet of `p` at quadrature node `node`.
pub trait PointFunctional: Sync {
    fn order(&self) -> usize;
    fn eval<T: Real>(&self, node: usize, x: &[f64], jet: &LocalJet<T>) -> T;
}

const CHUNK: usize = 32;

/// `Σ_i w_i F(i, x_i, jet_i)` and, when `grad` is given, its gradient with
/// respect to the parameters of `f`. Chunks are reduced in fixed order.
pub fn integrate_functional<F: Sublinear, P: PointFunctional>(
    f: &F,
    nodes: &[Vec<f64>],
    weights: &[f64],
    func: &P,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    let order = func.order();
    let want_grad = grad.is_some();
    let np = f.num_params();
    let idx: Vec<usize> = (0..nodes.len()).collect();
    let parts: Vec<(f64, Vec<f64>, Option<usize>)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sum = 0.0;
            let mut g = if want_grad { vec![0.0; np] } else { Vec::new() };
            let mut bad = None;
            for &i in chunk {
                let x = &nodes[i];
                let w = weights[i];
                let v = if want_grad {
                    let mut val = 0.0;
                    f.taylor_pullback(
                        x,
                        order,
                        &mut |tay| {
                            let jet = LocalJet::seeded(x, tay);
                            let out = func.eval(i, x, &jet);
                            val = out.v;
                            let mut cb: Coeffs = [0.0; MAX_COEFFS];
                            for (k, t) in out.tangents().iter().enumerate() {
                                cb[k] = w * t;
                            }
                            cb
                        },
                        &mut g,
                    );
                    val
                } else {
                    let tay = f.taylor(x, order);
                    func.eval(i, x, &LocalJet::from_taylor(x, &tay))
                };
                if !v.is_finite() && bad.is_none() {
                    bad = Some(i);
                }
                sum += w * v;
            }
            (sum, g, bad)
        })
        .collect();
    let mut total = 0.0;
    let mut gacc = if want_grad { vec![0.0; np] } else { Vec::new() };
    for (s, g, bad) in parts {
        if let Some(index) = bad {
            return Err(Error::NonFinite { index });
        }
        total += s;
        for (a, b) in gacc.iter_mut().zip(&g) {
            *a += b;
        }
    }
    if let Some(out) = grad {
        for (a, b) in out.iter_mut().zip(&gacc) {
            *a += b;
        }
    }
    Ok(total)
}

struct JacFunctional(Kind);
impl PointFunctional for JacFunctional {
    fn order(&self) -> usize {
        self.0.frame_order()
    }
    fn eval<T: Real>(&self, _: usize, _: &[f64], j: &LocalJet<T>) -> T {
        jac_point(self.0, j)
    }
}

struct SupportArea2;
impl PointFunctional for SupportArea2 {
    fn order(&self) -> usize {
        1
    }
    fn eval<T: Real>(&self, _: usize, x: &[f64], j: &LocalJet<T>) -> T {
        let ht = j.g[1] * x[0] - j.g[0] * x[1];
        (j.p * j.p - ht * ht) * 0.5
    }
}

struct SurfJacFunctional(Kind);
impl PointFunctional for SurfJacFunctional {
    fn order(&self) -> usize {
        self.0.frame_order()
    }
    fn eval<T: Real>(&self, _: usize, _: &[f64], j: &LocalJet<T>) -> T {
        frame_point(self.0, j).surf_jac
    }
}

/// Frame of the boundary map at a point of the unit sphere.
#[derive(Debug, Clone)]
pub struct BoundaryFrame {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub jmat: Vec<f64>,
    pub jac: f64,
    pub surf_jac: f64,
    pub n: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausdorffEstimate {
    pub value: f64,
    /// `true` when the value is a guaranteed upper bound (or exact), `false`
    /// for the discrete point-cloud estimate.
    pub is_bound: bool,
}

/// A sublinear function together with the way it parametrizes a body.
#[derive(Debug, Clone)]
pub struct ConvexBody<F> {
    pub f: F,
    pub kind: Kind,
}

impl<F: Sublinear + Clone> ConvexBody<F> {
    pub fn new(f: F, kind: Kind) -> Self {
        ConvexBody { f, kind }
    }

    pub fn gauge(f: F) -> Self {
        Self::new(f, Kind::Gauge)
    }

    pub fn support(f: F) -> Self {
        Self::new(f, Kind::Support)
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// The polar body: same function, roles of gauge and support swapped.
    pub fn polar(&self) -> Self {
        ConvexBody { f: self.f.clone(), kind: self.kind.flip() }
    }

    pub fn with_params(&self, theta: &[f64]) -> Self {
        ConvexBody { f: self.f.with_params(theta), kind: self.kind }
    }

    fn jet(&self, x: &[f64], order: usize) -> Result<LocalJet<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!("expected {} coordinates", self.dim())));
        }
        if norm(x) < 1e-12 {
            return Err(Error::Domain("boundary map evaluated at the origin".into()));
        }
        Ok(LocalJet::from_taylor(x, &self.f.taylor(x, order)))
    }

    pub fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() == self.dim() && norm(x) < 1e-12 {
            return Ok(vec![0.0; x.len()]);
        }
        let j = self.jet(x, self.kind.map_order())?;
        if self.kind == Kind::Gauge && j.p <= 0.0 {
            return Err(Error::InvalidBody(format!("gauge value {} ≤ 0 at {x:?}", j.p)));
        }
        Ok(map_point(self.kind, &j))
    }

    /// `φ⁻¹(y) = (p(y)/‖y‖) y` for gauge bodies.
    pub fn inverse_gauge(&self, y: &[f64]) -> Result<Vec<f64>> {
        if self.kind != Kind::Gauge {
            return Err(Error::Unsupported("inverse map of a support parametrization".into()));
        }
        let r = norm(y);
        if r < 1e-12 {
            return Err(Error::Domain("inverse map at the origin".into()));
        }
        let s = self.f.value(y) / r;
        Ok(y.iter().map(|a| a * s).collect())
    }

    pub fn boundary_frame(&self, x: &[f64]) -> Result<BoundaryFrame> {
        if (norm(x) - 1.0).abs() > 1e-10 {
            return Err(Error::Domain("boundary frame requested off the unit sphere".into()));
        }
        let j = self.jet(x, self.kind.frame_order())?;
        let fp = frame_point(self.kind, &j);
        let det = linalg::det(&fp.jmat, self.dim());
        if det.abs() < 1e-12 || !det.is_finite() {
            return Err(Error::DegenerateMap { point: x.to_vec(), det: det.abs() });
        }
        Ok(BoundaryFrame { x: x.to_vec(), y: fp.y, jmat: fp.jmat, jac: fp.jac, surf_jac: fp.surf_jac, n: fp.n })
    }

    pub fn weingarten(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.boundary_frame(x)?;
        let j = self.jet(x, self.kind.curvature_order())?;
        Ok(weingarten_point(self.kind, &j))
    }

    pub fn mean_curvature(&self, x: &[f64]) -> Result<f64> {
        Ok(self.curvatures(x)?.0)
    }

    pub fn gaussian_curvature(&self, x: &[f64]) -> Result<f64> {
        Ok(self.curvatures(x)?.1)
    }

    pub fn curvatures(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.boundary_frame(x)?;
        let j = self.jet(x, self.kind.curvature_order())?;
        Ok(curvatures_point(self.kind, &j))
    }

    /// `∫_B Jac φ`. The Jacobian is constant along rays, so the radial
    /// factor of the ball rule collapses to the sum of its radial weights.
    pub fn volume(&self, ball: &BallRule) -> Result<f64> {
        self.volume_grad(ball, None)
    }

    /// Volume and optionally its parameter gradient.
    ///
    /// Planar support bodies use `½∮(h² − h'²)`, the Jacobian formula
    /// integrated by parts. It needs only first derivatives, so sharp corners
    /// of `h` cannot hide curvature mass between quadrature nodes.
    pub fn volume_grad(&self, ball: &BallRule, grad: Option<&mut [f64]>) -> Result<f64> {
        if self.kind == Kind::Support && self.dim() == 2 {
            return integrate_functional(&self.f, &ball.sphere.nodes, &ball.sphere.weights, &SupportArea2, grad);
        }
        let radial: f64 = ball.radial.iter().map(|(_, w)| w).sum();
        let mut local = grad.as_ref().map(|g| vec![0.0; g.len()]);
        let s = integrate_functional(
            &self.f,
            &ball.sphere.nodes,
            &ball.sphere.weights,
            &JacFunctional(self.kind),
            local.as_deref_mut(),
        )?;
        if let (Some(out), Some(l)) = (grad, local) {
            for (a, b) in out.iter_mut().zip(&l) {
                *a += radial * b;
            }
        }
        Ok(radial * s)
    }

    /// `∫_{∂B} Jac_{∂B} φ`.
    pub fn surface_area(&self, sphere: &SphereRule) -> Result<f64> {
        self.surface_area_grad(sphere, None)
    }

    pub fn surface_area_grad(&self, sphere: &SphereRule, grad: Option<&mut [f64]>) -> Result<f64> {
        integrate_functional(&self.f, &sphere.nodes, &sphere.weights, &SurfJacFunctional(self.kind), grad)
    }

    /// `∫_Ω f = ∫_B (f∘φ) Jac φ`.
    pub fn volume_integral(&self, f: impl Fn(&[f64]) -> f64, ball: &BallRule) -> Result<f64> {
        let mut s = 0.0;
        for (i, (x, w)) in ball.nodes.iter().zip(&ball.weights).enumerate() {
            let j = self.jet(x, self.kind.frame_order())?;
            let v = f(&map_point(self.kind, &j)) * jac_point(self.kind, &j);
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            s += w * v;
        }
        Ok(s)
    }

    /// `∫_{∂Ω} g = ∫_{∂B} (g∘φ) Jac_{∂B} φ`; `g` receives the frame at each node.
    pub fn surface_integral(&self, g: impl Fn(&BoundaryFrame) -> f64, sphere: &SphereRule) -> Result<f64> {
        let mut s = 0.0;
        for (i, (x, w)) in sphere.nodes.iter().zip(&sphere.weights).enumerate() {
            let fr = self.boundary_frame(x)?;
            let v = g(&fr) * fr.surf_jac;
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            s += w * v;
        }
        Ok(s)
    }

    /// Hausdorff distance estimate from `n` sphere samples.
    ///
    /// Two gauge bodies: `sup |1/p_A − 1/p_B|`, the radial-function bound.
    /// Two support bodies: `sup |h_A − h_B|`, which equals the Hausdorff
    /// distance up to sampling. Mixed kinds: symmetric Hausdorff distance of
    /// the two mapped point clouds (an estimate, not a bound).
    pub fn hausdorff_estimate<G: Sublinear + Clone>(
        &self,
        other: &ConvexBody<G>,
        n: usize,
    ) -> Result<HausdorffEstimate> {
        let rule = sphere_rule(self.dim(), n)?;
        match (self.kind, other.kind) {
            (Kind::Gauge, Kind::Gauge) => {
                let v = rule
                    .nodes
                    .iter()
                    .map(|u| (1.0 / self.f.value(u) - 1.0 / other.f.value(u)).abs())
                    .fold(0.0, f64::max);
                Ok(HausdorffEstimate { value: v, is_bound: true })
            }
            (Kind::Support, Kind::Support) => {
                let v = rule.nodes.iter().map(|u| (self.f.value(u) - other.f.value(u)).abs()).fold(0.0, f64::max);
                Ok(HausdorffEstimate { value: v, is_bound: true })
            }
            _ => {
                let a: Vec<Vec<f64>> = rule.nodes.iter().map(|u| self.map(u)).collect::<Result<_>>()?;
                let b: Vec<Vec<f64>> = rule.nodes.iter().map(|u| other.map(u)).collect::<Result<_>>()?;
                let directed = |p: &[Vec<f64>], q: &[Vec<f64>]| {
                    p.par_iter()
                        .map(|x| {
                            q.iter()
                                .map(|y| x.iter().zip(y).map(|(s, t)| (s - t) * (s - t)).sum::<f64>())
                                .fold(f64::INFINITY, f64::min)
                        })
                        .reduce(|| 0.0, f64::max)
                        .sqrt()
                };
                Ok(HausdorffEstimate { value: directed(&a, &b).max(directed(&b, &a)), is_bound: false })
            }
        }
    }
}

/// The gauge boundary map as a generic vector field (for autodiff checks).
pub struct GaugeMapField<'a, F>(pub &'a F);

impl<F: ScalarField> VectorField for GaugeMapField<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        let r = norm(x);
        let s = r / self.0.eval(x);
        x.iter().map(|&a| a * s).collect()
    }
    fn is_singular(&self, x: &[f64]) -> bool {
        norm(x) < 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{compare_gradient, jacobian};
    use crate::net::SublinearNet;
    use crate::quadrature::{ball_rule, sphere_rule};
    use crate::sublinear::{PolytopeMax, Quadratic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn near_ball(d: usize, m: usize, seed: u64) -> SublinearNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = sphere_rule(d, 256).unwrap();
        SublinearNet::random(d, m, &mut rng).normalize_scale(&rule).unwrap()
    }

    #[test]
    fn ball_maps() {
        let g = ConvexBody::gauge(Quadratic::ball(3, 2.0));
        let y = g.map(&[0.6, 0.0, 0.8]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-15 && (y[2] - 0.4).abs() < 1e-15);
        let s = ConvexBody::support(Quadratic::ball(2, 1.5));
        let y = s.map(&[0.6, 0.8]).unwrap();
        assert!((y[0] - 0.9).abs() < 1e-15 && (y[1] - 1.2).abs() < 1e-15);
        assert_eq!(s.map(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn smoothed_square_vertex() {
        let sq = PolytopeMax::cube_gauge(2);
        let body = ConvexBody::gauge(SublinearNet::from_polytope_gauge(&sq.rows, 1e-3).unwrap());
        let y = body.map(&[1.0, 0.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-2 && y[1].abs() < 1e-2);
    }

    #[test]
    fn inverse_gauge_round_trip() {
        let body = ConvexBody::gauge(near_ball(3, 20, 3));
        let y = [0.2, -0.3, 0.4];
        let x = body.inverse_gauge(&y).unwrap();
        let back = body.map(&x).unwrap();
        for k in 0..3 {
            assert!((back[k] - y[k]).abs() < 1e-10);
        }
        let ball = ConvexBody::gauge(Quadratic::ball(2, 1.0));
        let x = ball.inverse_gauge(&[0.3, 0.1]).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-15);
        let u: Vec<f64> = body.map(&[0.6, 0.0, 0.8]).unwrap();
        let xb = body.inverse_gauge(&u).unwrap();
        assert!((norm(&xb) - 1.0).abs() < 1e-10);
        assert!(body.polar().inverse_gauge(&y).is_err());
    }

    #[test]
    fn frames_of_simple_bodies() {
        let id = ConvexBody::gauge(Quadratic::ball(3, 1.0));
        let x = [0.0, 0.6, 0.8];
        let f = id.boundary_frame(&x).unwrap();
        assert!((f.jac - 1.0).abs() < 1e-14 && (f.surf_jac - 1.0).abs() < 1e-14);
        for k in 0..3 {
            assert!((f.n[k] - x[k]).abs() < 1e-14);
        }
        let sc = ConvexBody::support(Quadratic::ball(3, 0.5));
        let f = sc.boundary_frame(&x).unwrap();
        assert!((f.jac - 0.125).abs() < 1e-14 && (f.surf_jac - 0.25).abs() < 1e-14);
        assert!(id.boundary_frame(&[0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn normals_are_orthogonal_to_image_tangents() {
        let body = ConvexBody::gauge(near_ball(3, 24, 5));
        let x = [0.48, 0.6, 0.64];
        let f = body.boundary_frame(&x).unwrap();
        let tangents = [[0.6, -0.48, 0.0], [0.64, 0.0, -0.48]];
        for t in tangents {
            let h = 1e-6;
            let xp: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a - h * b).collect();
            let n_p = norm(&xp);
            let n_m = norm(&xm);
            let yp = body.map(&xp.iter().map(|a| a / n_p).collect::<Vec<_>>()).unwrap();
            let ym = body.map(&xm.iter().map(|a| a / n_m).collect::<Vec<_>>()).unwrap();
            let tan: Vec<f64> = yp.iter().zip(&ym).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let dotp: f64 = tan.iter().zip(&f.n).map(|(a, b)| a * b).sum();
            assert!(dotp.abs() < 1e-8 * norm(&tan));
        }
        // normal parallel to the level-set gradient at y
        let g = body.f.eval_grad(&f.y).unwrap();
        let cos: f64 = g.iter().zip(&f.n).map(|(a, b)| a * b).sum::<f64>() / norm(&g);
        assert!(cos > 1.0 - 1e-8);
    }

    #[test]
    fn gauge_map_jacobian_matches_fd() {
        let net = near_ball(3, 16, 11);
        let x = [0.3, -0.5, 0.7];
        let j = jacobian(&GaugeMapField(&net), &x).unwrap();
        let body = ConvexBody::gauge(net.clone());
        let h = 1e-6;
        for b in 0..3 {
            let mut xp = x;
            xp[b] += h;
            let mut xm = x;
            xm[b] -= h;
            let (yp, ym) = (body.map(&xp).unwrap(), body.map(&xm).unwrap());
            for a in 0..3 {
                let fd = (yp[a] - ym[a]) / (2.0 * h);
                assert!((j[a][b] - fd).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
        let jet = LocalJet::from_taylor(&x, &net.taylor(&x, 1));
        let jm = jacobian_point(Kind::Gauge, &jet);
        for a in 0..3 {
            for b in 0..3 {
                assert!((jm[a * 3 + b] - j[a][b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_curvatures() {
        for d in 2..=4 {
            let r = 0.7;
            let x: Vec<f64> = (0..d)
                .map(|k| {
                    if k == 0 {
                        0.6
                    } else if k == 1 {
                        0.8
                    } else {
                        0.0
                    }
                })
                .collect();
            for body in [ConvexBody::gauge(Quadratic::ball(d, 1.0 / r)), ConvexBody::support(Quadratic::ball(d, r))] {
                let s = body.weingarten(&x).unwrap();
                let k = d - 1;
                for i in 0..k {
                    for j in 0..k {
                        let e = if i == j { 1.0 / r } else { 0.0 };
                        assert!((s[i * k + j] - e).abs() < 1e-12);
                    }
                }
                let (h, kappa) = body.curvatures(&x).unwrap();
                assert!((h - 1.0 / r).abs() < 1e-12);
                assert!((kappa - r.powi(-(k as i32))).abs() < 1e-12);
            }
        }
        // degenerate Householder branch: n = e_d
        let b = ConvexBody::gauge(Quadratic::ball(3, 2.0));
        let (h, k) = b.curvatures(&[0.0, 0.0, 1.0]).unwrap();
        assert!((h - 2.0).abs() < 1e-12 && (k - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ellipse_vertex_curvature() {
        // support of the ellipse with semi-axes (2, 1): the boundary point
        // (2, 0) has normal e₁ and curvature a/b² = 2
        let body = ConvexBody::support(Quadratic::ellipsoid_support(&[2.0, 1.0]));
        let y = body.map(&[1.0, 0.0]).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-14);
        let (h, k) = body.curvatures(&[1.0, 0.0]).unwrap();
        assert!((k - 2.0).abs() < 1e-12 && (h - k).abs() < 1e-15);
        // the same ellipse as a gauge body agrees at the same boundary point
        let g = ConvexBody::gauge(Quadratic::ellipsoid_gauge(&[2.0, 1.0]));
        assert!((g.gaussian_curvature(&[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_gauss_curvature() {
        let ax = [1.3, 1.0, 0.8];
        let h = Quadratic::ellipsoid_support(&ax);
        let body = ConvexBody::support(h.clone());
        let rule = sphere_rule(3, 64).unwrap();
        for u in &rule.nodes {
            let k = body.gaussian_curvature(u).unwrap();
            let expect = h.value(u).powi(4) / (ax[0] * ax[1] * ax[2]).powi(2);
            assert!((k - expect).abs() < 1e-10 * expect);
            let s = body.weingarten(u).unwrap();
            assert!((s[1] - s[2]).abs() < 1e-8);
        }
    }

    #[test]
    fn volumes_and_areas() {
        let s2 = sphere_rule(2, 256).unwrap();
        let b2 = ball_rule(2, 16, &s2).unwrap();
        let disk = ConvexBody::gauge(Quadratic::ball(2, 1.0));
        assert!((disk.volume(&b2).unwrap() - PI).abs() < 1e-6);
        assert!((disk.surface_area(&s2).unwrap() - 2.0 * PI).abs() < 1e-6);
        let s3 = sphere_rule(3, 2048).unwrap();
        let b3 = ball_rule(3, 16, &s3).unwrap();
        let half = ConvexBody::gauge(Quadratic::ball(3, 2.0));
        assert!((half.volume(&b3).unwrap() - PI / 6.0).abs() < 1e-5);
        let sq = PolytopeMax::cube_gauge(2);
        let sqb = ConvexBody::gauge(SublinearNet::from_polytope_gauge(&sq.rows, 1e-3).unwrap());
        let s2f = sphere_rule(2, 4096).unwrap();
        let b2f = ball_rule(2, 4, &s2f).unwrap();
        assert!((sqb.volume(&b2f).unwrap() - 4.0).abs() < 1e-2);
        // Mahler volume of the disk
        let m = disk.volume(&b2).unwrap() * disk.polar().volume(&b2).unwrap();
        assert!((m - PI * PI).abs() < 1e-6);
        let pp = disk.polar().polar();
        assert_eq!(pp.kind, disk.kind);
        // full ball rule agrees with the ray-collapsed volume
        let net = ConvexBody::gauge(near_ball(2, 8, 2));
        let full = net.volume_integral(|_| 1.0, &b2).unwrap();
        assert!((full - net.volume(&b2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn integral_identities_on_random_bodies() {
        for kind in [Kind::Gauge, Kind::Support] {
            let s2 = sphere_rule(2, 512).unwrap();
            let b2 = ball_rule(2, 4, &s2).unwrap();
            let body = ConvexBody::new(near_ball(2, 16, 21), kind);
            let flux = body.surface_integral(|f| f.y[0] * f.n[0] + f.y[1] * f.n[1], &s2).unwrap();
            let vol = body.volume(&b2).unwrap();
            assert!((flux / (2.0 * vol) - 1.0).abs() < 1e-4);
            let tc = body.surface_integral(|f| body.mean_curvature(&f.x).unwrap(), &s2).unwrap();
            assert!((tc / (2.0 * PI) - 1.0).abs() < 1e-3, "{tc}");

            let s3 = sphere_rule(3, 2048).unwrap();
            let b3 = ball_rule(3, 4, &s3).unwrap();
            let body = ConvexBody::new(near_ball(3, 16, 22), kind);
            let flux = body.surface_integral(|f| f.y.iter().zip(&f.n).map(|(a, b)| a * b).sum(), &s3).unwrap();
            let vol = body.volume(&b3).unwrap();
            assert!((flux / (3.0 * vol) - 1.0).abs() < 1e-4);
            let gb = body.surface_integral(|f| body.gaussian_curvature(&f.x).unwrap(), &s3).unwrap();
            assert!((gb / (4.0 * PI) - 1.0).abs() < 1e-2, "{gb}");
        }
    }

    #[test]
    fn volume_parameter_gradient() {
        for (d, kind) in [(2, Kind::Gauge), (3, Kind::Support)] {
            let s = sphere_rule(d, 128).unwrap();
            let b = ball_rule(d, 4, &s).unwrap();
            let body = ConvexBody::new(near_ball(d, 6, 31), kind);
            let theta = body.f.params();
            let mut g = vec![0.0; theta.len()];
            body.volume_grad(&b, Some(&mut g)).unwrap();
            let r = compare_gradient(|t| body.with_params(t).volume(&b).unwrap(), g, &theta, 1e-6);
            assert!(r.max_rel_error < 1e-5, "{kind:?}: {}", r.max_rel_error);
            let mut g = vec![0.0; theta.len()];
            body.surface_area_grad(&s, Some(&mut g)).unwrap();
            let r = compare_gradient(|t| body.with_params(t).surface_area(&s).unwrap(), g, &theta, 1e-6);
            assert!(r.max_rel_error < 1e-5, "{kind:?}: {}", r.max_rel_error);
        }
    }

    #[test]
    fn hausdorff_estimates() {
        let a = ConvexBody::gauge(Quadratic::ball(3, 1.0));
        let b = ConvexBody::gauge(Quadratic::ball(3, 1.0 / 1.2));
        let h = a.hausdorff_estimate(&b, 2000).unwrap();
        assert!((h.value - 0.2).abs() < 1e-6 && h.is_bound);
        assert_eq!(a.hausdorff_estimate(&a, 500).unwrap().value, 0.0);
        let c = ConvexBody::support(Quadratic::ball(2, 1.2));
        let d = ConvexBody::gauge(Quadratic::ball(2, 1.0));
        let m = d.hausdorff_estimate(&c, 1000).unwrap();
        assert!(!m.is_bound && (m.value - 0.2).abs() < 1e-3);
    }
}
