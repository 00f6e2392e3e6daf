//! The interface shared by networks and analytic sublinear functions.

use crate::autodiff::{Coeffs, Dual, JetSpace, Real, ScalarField, Taylor, MAX_COEFFS};

/// A positively homogeneous convex function with spatial Taylor jets and,
/// for parametrized functions, a pullback of coefficient cotangents to `θ`.
pub trait Sublinear: ScalarField + Sync + Send {
    fn num_params(&self) -> usize {
        0
    }

    fn params(&self) -> Vec<f64> {
        Vec::new()
    }

    /// A copy with parameters replaced by `theta`.
    fn with_params(&self, theta: &[f64]) -> Self
    where
        Self: Sized;

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    /// Taylor coefficients at `x` up to `order` (≤ 3).
    fn taylor(&self, x: &[f64], order: usize) -> Taylor;

    /// Computes the Taylor jet, asks `cot` for the cotangent of each
    /// coefficient and accumulates the resulting parameter gradient.
    fn taylor_pullback(
        &self,
        x: &[f64],
        order: usize,
        cot: &mut dyn FnMut(&Taylor) -> Coeffs,
        grad: &mut [f64],
    ) -> Taylor {
        let _ = grad;
        let t = self.taylor(x, order);
        cot(&t);
        t
    }
}

/// Taylor coefficients of a generic scalar field via nested forward mode.
pub fn taylor_from_field<F: ScalarField + ?Sized>(f: &F, x: &[f64], order: usize) -> Taylor {
    let d = x.len();
    let space = JetSpace::get(d, order);
    let mut c: Coeffs = [0.0; MAX_COEFFS];
    for (k, m) in space.monomials.iter().enumerate() {
        let mut idx = Vec::new();
        for (a, &e) in m.iter().enumerate() {
            for _ in 0..e {
                idx.push(a);
            }
        }
        let unit = |a: usize| (0..d).map(move |i| if i == a { 1.0 } else { 0.0 });
        let deriv = match idx.len() {
            0 => f.eval(x),
            1 => {
                let p: Vec<Dual<f64>> = x.iter().zip(unit(idx[0])).map(|(&v, e)| Dual::new(v, e)).collect();
                f.eval(&p).eps
            }
            2 => {
                let p: Vec<Dual<Dual<f64>>> = x
                    .iter()
                    .zip(unit(idx[0]).zip(unit(idx[1])))
                    .map(|(&v, (ea, eb))| Dual::new(Dual::new(v, ea), Dual::new(eb, 0.0)))
                    .collect();
                f.eval(&p).eps.eps
            }
            _ => {
                let d1: Vec<f64> = unit(idx[0]).collect();
                let d2: Vec<f64> = unit(idx[1]).collect();
                let d3: Vec<f64> = unit(idx[2]).collect();
                let p = crate::autodiff::seed3(x, &d1, &d2, &d3);
                crate::autodiff::third_coefficient(&f.eval(&p))
            }
        };
        c[k] = deriv / space.factorials[k];
    }
    Taylor { dim: d, order, c }
}

/// `c · ‖Λx‖` with diagonal `Λ`: balls (`Λ = I`) and ellipsoids.
///
/// As a gauge, `Quadratic::ellipsoid_gauge(a)` has unit level set the
/// ellipsoid with semi-axes `a`; as a support function,
/// `Quadratic::ellipsoid_support(a)` is the support function of that
/// ellipsoid.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub scale: Vec<f64>,
}

impl Quadratic {
    /// `c‖x‖`: gauge of the ball of radius `1/c`, support of the ball of radius `c`.
    pub fn ball(d: usize, c: f64) -> Self {
        Quadratic { scale: vec![c; d] }
    }

    pub fn ellipsoid_gauge(axes: &[f64]) -> Self {
        Quadratic { scale: axes.iter().map(|a| 1.0 / a).collect() }
    }

    pub fn ellipsoid_support(axes: &[f64]) -> Self {
        Quadratic { scale: axes.to_vec() }
    }
}

impl ScalarField for Quadratic {
    fn dim(&self) -> usize {
        self.scale.len()
    }
    fn eval<T: Real>(&self, x: &[T]) -> T {
        let mut s = T::zero();
        for (v, c) in x.iter().zip(&self.scale) {
            let y = *v * *c;
            s += y * y;
        }
        s.sqrt()
    }
    fn is_singular(&self, x: &[f64]) -> bool {
        crate::autodiff::norm(x) < 1e-12
    }
}

impl Sublinear for Quadratic {
    fn with_params(&self, _theta: &[f64]) -> Self {
        self.clone()
    }
    fn taylor(&self, x: &[f64], order: usize) -> Taylor {
        taylor_from_field(self, x, order)
    }
}

/// The exact polytope form `max_i w_i·x` (a gauge when the `w_i` are facet
/// normals scaled by inverse facet distances, a support function when they
/// are vertices). Not differentiable across ties; derivatives are those of
/// the active piece.
#[derive(Debug, Clone)]
pub struct PolytopeMax {
    pub d: usize,
    pub rows: Vec<Vec<f64>>,
}

impl PolytopeMax {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        let d = rows[0].len();
        PolytopeMax { d, rows }
    }

    /// `‖x‖₁`, the gauge of the cross-polytope (octahedron in 3D).
    pub fn cross_polytope_gauge(d: usize) -> Self {
        let mut rows = Vec::new();
        for mask in 0..(1usize << d) {
            rows.push((0..d).map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 }).collect());
        }
        Self::new(rows)
    }

    /// `‖x‖∞`, the gauge of the cube `[-1, 1]ᵈ`.
    pub fn cube_gauge(d: usize) -> Self {
        let mut rows = Vec::new();
        for k in 0..d {
            for s in [1.0, -1.0] {
                let mut r = vec![0.0; d];
                r[k] = s;
                rows.push(r);
            }
        }
        Self::new(rows)
    }

    /// Gauge of the regular simplex whose facets lie at unit distance from 0.
    pub fn simplex_gauge(d: usize) -> Self {
        Self::new(regular_simplex(d))
    }

    fn active(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut bv = f64::NEG_INFINITY;
        for (i, r) in self.rows.iter().enumerate() {
            let v: f64 = r.iter().zip(x).map(|(a, b)| a * b).sum();
            if v > bv {
                bv = v;
                best = i;
            }
        }
        best
    }
}

/// Unit vectors pointing at the vertices of a regular simplex centred at 0.
pub fn regular_simplex(d: usize) -> Vec<Vec<f64>> {
    // vertices of the standard simplex in ℝ^{d+1}, centred and projected to an
    // orthonormal basis of the hyperplane Σ = 0 by Gram–Schmidt
    let n = d + 1;
    let c = 1.0 / n as f64;
    let pts: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 - c } else { -c }).collect()).collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in &pts {
        let mut v = p.clone();
        for b in &basis {
            let dp: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dp * bi;
            }
        }
        let nn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nn > 1e-9 && basis.len() < d {
            basis.push(v.iter().map(|a| a / nn).collect());
        }
    }
    pts.iter()
        .map(|p| {
            let q: Vec<f64> = basis.iter().map(|b| b.iter().zip(p).map(|(a, c)| a * c).sum()).collect();
            let nn = q.iter().map(|a| a * a).sum::<f64>().sqrt();
            q.iter().map(|a| a / nn).collect()
        })
        .collect()
}

impl ScalarField for PolytopeMax {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval<T: Real>(&self, x: &[T]) -> T {
        let xv: Vec<f64> = x.iter().map(Real::value).collect();
        let i = self.active(&xv);
        crate::autodiff::dot_f64(x, &self.rows[i])
    }
}

impl Sublinear for PolytopeMax {
    fn with_params(&self, _theta: &[f64]) -> Self {
        self.clone()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
    }
    fn taylor(&self, x: &[f64], order: usize) -> Taylor {
        taylor_from_field(self, x, order)
    }
}

/// Closed-form sublinear functions used as targets and oracles.
#[derive(Debug, Clone)]
pub enum Analytic {
    Quadratic(Quadratic),
    Polytope(PolytopeMax),
}

impl ScalarField for Analytic {
    fn dim(&self) -> usize {
        match self {
            Analytic::Quadratic(q) => q.dim(),
            Analytic::Polytope(p) => p.dim(),
        }
    }
    fn eval<T: Real>(&self, x: &[T]) -> T {
        match self {
            Analytic::Quadratic(q) => q.eval(x),
            Analytic::Polytope(p) => p.eval(x),
        }
    }
    fn is_singular(&self, x: &[f64]) -> bool {
        crate::autodiff::norm(x) < 1e-12
    }
}

impl Sublinear for Analytic {
    fn with_params(&self, _theta: &[f64]) -> Self {
        self.clone()
    }
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Analytic::Quadratic(q) => q.value(x),
            Analytic::Polytope(p) => p.value(x),
        }
    }
    fn taylor(&self, x: &[f64], order: usize) -> Taylor {
        match self {
            Analytic::Quadratic(q) => q.taylor(x, order),
            Analytic::Polytope(p) => p.taylor(x, order),
        }
    }
}
