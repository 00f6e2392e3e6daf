//! Derivatives of generic scalar and vector fields plus finite-difference checks.

use super::dual::{seed3, third_coefficient, Dual, Dual3};
use super::real::Real;
use crate::error::{Error, Result};

/// A scalar function written once for every [`Real`] scalar type.
pub trait ScalarField {
    fn dim(&self) -> usize;
    fn eval<T: Real>(&self, x: &[T]) -> T;
    /// Points where the field is declared non-differentiable.
    fn is_singular(&self, _x: &[f64]) -> bool {
        false
    }
}

/// A map `ℝᵏ → ℝᵏ` written once for every [`Real`] scalar type.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T>;
    fn is_singular(&self, _x: &[f64]) -> bool {
        false
    }
}

fn check_point(x: &[f64], dim: usize, singular: bool) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Domain(format!("expected {dim} coordinates, got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite input".into()));
    }
    if singular {
        return Err(Error::Domain(format!("singular point {x:?}")));
    }
    Ok(())
}

fn seeded(x: &[f64], k: usize) -> Vec<Dual<f64>> {
    x.iter().enumerate().map(|(i, &v)| Dual::new(v, if i == k { 1.0 } else { 0.0 })).collect()
}

pub fn gradient<F: ScalarField>(f: &F, x: &[f64]) -> Result<Vec<f64>> {
    check_point(x, f.dim(), f.is_singular(x))?;
    Ok((0..x.len()).map(|k| f.eval(&seeded(x, k)).eps).collect())
}

/// Row-major Jacobian `J[i][k] = ∂F_i/∂x_k`.
pub fn jacobian<F: VectorField>(f: &F, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_point(x, f.dim(), f.is_singular(x))?;
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    for k in 0..n {
        let out = f.eval(&seeded(x, k));
        for (i, o) in out.iter().enumerate() {
            jac[i][k] = o.eps;
        }
    }
    Ok(jac)
}

pub fn hessian<F: ScalarField>(f: &F, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_point(x, f.dim(), f.is_singular(x))?;
    let n = x.len();
    let mut h = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let p: Vec<Dual<Dual<f64>>> = x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let da = if i == a { 1.0 } else { 0.0 };
                    let db = if i == b { 1.0 } else { 0.0 };
                    Dual::new(Dual::new(v, da), Dual::new(db, 0.0))
                })
                .collect();
            let v = f.eval(&p).eps.eps;
            h[a][b] = v;
            h[b][a] = v;
        }
    }
    Ok(h)
}

/// `D³f(x)[d1, d2, d3]`.
pub fn third_directional<F: ScalarField>(f: &F, x: &[f64], d1: &[f64], d2: &[f64], d3: &[f64]) -> Result<f64> {
    check_point(x, f.dim(), f.is_singular(x))?;
    let p: Vec<Dual3> = seed3(x, d1, d2, d3);
    Ok(third_coefficient(&f.eval(&p)))
}

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone)]
pub struct GradientReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `max_i |analytic_i − numeric_i| / max(‖numeric‖∞, 1e-300)`.
    pub max_rel_error: f64,
}

impl GradientReport {
    fn new(analytic: Vec<f64>, numeric: Vec<f64>) -> Self {
        let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let err = analytic.iter().zip(&numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
        GradientReport { analytic, numeric, max_rel_error: err / scale }
    }
}

/// Central differences of `value` at `x` along every coordinate.
pub fn central_differences(value: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            xp[k] = x[k] + step;
            let fp = value(&xp);
            xp[k] = x[k] - step;
            let fm = value(&xp);
            xp[k] = x[k];
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Compares a supplied gradient against central differences of `value`.
pub fn compare_gradient(value: impl Fn(&[f64]) -> f64, analytic: Vec<f64>, x: &[f64], step: f64) -> GradientReport {
    assert!(step > 0.0, "finite-difference step must be positive");
    let numeric = central_differences(value, x, step);
    GradientReport::new(analytic, numeric)
}

/// Checks the forward-mode gradient of a generic scalar field.
pub fn check_gradient<F: ScalarField>(f: &F, x: &[f64], step: f64) -> Result<GradientReport> {
    let g = gradient(f, x)?;
    Ok(compare_gradient(|y| f.eval(y), g, x, step))
}

/// Mixed third derivative `D³f(x)[d1, d2, d3]` from nested five-point
/// first-derivative stencils (64 evaluations).
pub fn third_directional_fd(f: impl Fn(&[f64]) -> f64, x: &[f64], d1: &[f64], d2: &[f64], d3: &[f64], h: f64) -> f64 {
    const TAPS: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let mut p = vec![0.0; x.len()];
    let mut acc = 0.0;
    for &(s, ws) in &TAPS {
        for &(t, wt) in &TAPS {
            for &(u, wu) in &TAPS {
                for k in 0..x.len() {
                    p[k] = x[k] + h * (s * d1[k] + t * d2[k] + u * d3[k]);
                }
                acc += ws * wt * wu * f(&p);
            }
        }
    }
    acc / (12.0 * h).powi(3)
}
