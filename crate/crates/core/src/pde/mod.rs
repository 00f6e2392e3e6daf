//! Mesh-free Poisson solvers on bodies given by a boundary map from the unit ball.

mod galerkin;
mod mfs;

pub use galerkin::{
    assemble_galerkin, halton_ball_centers, poisson_objective, solve_galerkin, GalerkinConfig, GalerkinSolution,
    GalerkinSystem, RbfBasis,
};
pub use mfs::{
    fundamental, fundamental_grad, fundamental_hessian, solve_torsion_mfs, torsion_gradient_data, MfsConfig, MfsModel,
    TorsionGradientData,
};

use crate::autodiff::Real;
use crate::error::Result;
use crate::geometry::ConvexBody;
use crate::sublinear::Sublinear;

/// A solved PDE, evaluated at reference-ball points `x̂` (physical point `φ(x̂)`).
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum PdeSolution {
    Galerkin(GalerkinSolution),
    Mfs(MfsModel),
}

impl PdeSolution {
    pub fn eval_reference<F: Sublinear + Clone>(&self, body: &ConvexBody<F>, x: &[f64]) -> Result<f64> {
        match self {
            PdeSolution::Galerkin(s) => Ok(s.eval(x)),
            PdeSolution::Mfs(m) => Ok(m.torsion_eval(&body.map(x)?)),
        }
    }
}

/// CSV rows `y₁,…,y_d,u` on a polar grid of the reference ball mapped into
/// the body (`rings × per_ring` points plus the centre).
pub fn sample_csv<F: Sublinear + Clone>(
    sol: &PdeSolution,
    body: &ConvexBody<F>,
    rings: usize,
    per_ring: usize,
) -> Result<String> {
    let d = body.dim();
    let dirs = crate::quadrature::sphere_rule(d, per_ring.max(8))?;
    let mut out = String::new();
    let header: Vec<String> = (1..=d).map(|k| format!("y{k}")).collect();
    out.push_str(&format!("{},u\n", header.join(",")));
    let mut row = |y: &[f64], u: f64| {
        let cols: Vec<String> = y.iter().map(|v| format!("{v:.12e}")).collect();
        out.push_str(&format!("{},{u:.12e}\n", cols.join(",")));
    };
    let centre = vec![0.0; d];
    row(&centre, sol_at(sol, body, &centre)?);
    for k in 1..=rings {
        let r = k as f64 / rings as f64;
        for u in &dirs.nodes {
            let x: Vec<f64> = u.iter().map(|a| a * r).collect();
            let y = body.map(&x)?;
            row(&y, sol_at(sol, body, &x)?);
        }
    }
    Ok(out)
}

fn sol_at<F: Sublinear + Clone>(sol: &PdeSolution, body: &ConvexBody<F>, x: &[f64]) -> Result<f64> {
    match sol {
        PdeSolution::Galerkin(s) => Ok(s.eval(x)),
        PdeSolution::Mfs(m) => Ok(m.torsion_eval(&body.map(x)?)),
    }
}

/// Volume of the unit ball in `ℝᵈ` (as used by the fundamental solution).
pub(crate) fn omega(d: usize) -> f64 {
    crate::quadrature::ball_volume(d)
}

pub(crate) fn sq_norm<T: Real>(z: &[T]) -> T {
    let mut s = T::zero();
    for &a in z {
        s += a * a;
    }
    s
}
