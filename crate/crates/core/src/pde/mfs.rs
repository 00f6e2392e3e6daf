//! Method of fundamental solutions for the torsion problem `−Δu = 1`,
//! `u = 0` on `∂Ω`, via the harmonic function `φ = u + y₁²/2` with boundary
//! data `y₁²/2`, plus adjoints of the least-squares fit with respect to the
//! parameters of the body.

use nalgebra::{DMatrix, DVector};

use super::{omega, sq_norm};
use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::geometry::{
    frame_point, integrate_functional, jac_point, map_point, ConvexBody, Kind, LocalJet, PointFunctional,
};
use crate::quadrature::{sphere_rule, BallRule};
use crate::sublinear::Sublinear;

/// Free-space fundamental solution of `−Δ` in `ℝᵈ`.
pub fn fundamental<T: Real>(z: &[T]) -> T {
    let d = z.len();
    let r2 = sq_norm(z);
    if d == 2 {
        r2.ln() * (-1.0 / (4.0 * std::f64::consts::PI))
    } else {
        r2.powf((2.0 - d as f64) / 2.0) / (d as f64 * (d as f64 - 2.0) * omega(d))
    }
}

/// `∇ψ(z) = −z / (d ω_d ‖z‖ᵈ)`.
pub fn fundamental_grad<T: Real>(z: &[T]) -> Vec<T> {
    let d = z.len();
    let r2 = sq_norm(z);
    let s = r2.powf(-(d as f64) / 2.0) * (-1.0 / (d as f64 * omega(d)));
    z.iter().map(|&a| a * s).collect()
}

/// `∇²ψ(z)`, row-major.
pub fn fundamental_hessian(z: &[f64]) -> Vec<f64> {
    let d = z.len();
    let r2: f64 = z.iter().map(|a| a * a).sum();
    let c = -1.0 / (d as f64 * omega(d));
    let rd = r2.powf(-(d as f64) / 2.0);
    let mut h = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            let delta = if a == b { 1.0 } else { 0.0 };
            h[a * d + b] = c * rd * (delta - d as f64 * z[a] * z[b] / r2);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfsConfig {
    pub n0: usize,
    pub eps0: f64,
    pub tol: f64,
    pub max_rounds: usize,
    /// Boundary fit samples per source.
    pub fit_factor: usize,
    /// Residual check samples per source.
    pub check_factor: usize,
    /// Rounds stop before the source count would exceed this.
    pub max_sources: usize,
}

impl Default for MfsConfig {
    fn default() -> Self {
        MfsConfig { n0: 64, eps0: 0.3, tol: 1e-5, max_rounds: 6, fit_factor: 8, check_factor: 32, max_sources: 1024 }
    }
}

/// A fitted fundamental-solution expansion `φ̃(y) = Σ_j c_j ψ(y − s_j) + c₀`.
#[derive(Debug, Clone)]
pub struct MfsModel {
    pub d: usize,
    pub kind: Kind,
    pub eps: f64,
    pub source_dirs: Vec<Vec<f64>>,
    pub sources: Vec<Vec<f64>>,
    /// One coefficient per source followed by the constant term.
    pub coeffs: Vec<f64>,
    pub fit_dirs: Vec<Vec<f64>>,
    pub fit_points: Vec<Vec<f64>>,
    /// Sup-norm boundary error on the independent check set.
    pub residual: f64,
    matrix: DMatrix<f64>,
    data: DVector<f64>,
    col_scale: Vec<f64>,
    v: DMatrix<f64>,
    sigma: Vec<f64>,
}

fn check_directions(d: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    let rule = sphere_rule(d, n)?;
    if d != 2 {
        return Ok(rule.nodes);
    }
    let t = std::f64::consts::PI / n as f64;
    let (c, s) = (t.cos(), t.sin());
    Ok(rule.nodes.iter().map(|u| vec![c * u[0] - s * u[1], s * u[0] + c * u[1]]).collect())
}

impl MfsModel {
    /// Least-squares fit with `n` sources at offset `eps`.
    pub fn fit<F: Sublinear + Clone>(body: &ConvexBody<F>, n: usize, eps: f64, cfg: &MfsConfig) -> Result<Self> {
        let d = body.dim();
        let source_dirs = sphere_rule(d, n)?.nodes;
        let fit_dirs = sphere_rule(d, cfg.fit_factor * n)?.nodes;
        let sources = source_dirs
            .iter()
            .map(|u| {
                let y = body.map(u)?;
                Ok(match body.kind {
                    Kind::Gauge => y.iter().map(|a| a * (1.0 + eps)).collect(),
                    Kind::Support => y.iter().zip(u).map(|(a, b)| a + eps * b).collect(),
                })
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let fit_points = fit_dirs.iter().map(|u| body.map(u)).collect::<Result<Vec<_>>>()?;
        let rows = fit_points.len();
        let cols = n + 1;
        let mut m = DMatrix::<f64>::zeros(rows, cols);
        let mut z = vec![0.0; d];
        for (i, b) in fit_points.iter().enumerate() {
            for (j, s) in sources.iter().enumerate() {
                for k in 0..d {
                    z[k] = b[k] - s[k];
                }
                m[(i, j)] = fundamental(&z);
            }
            m[(i, n)] = 1.0;
        }
        let g = DVector::from_iterator(rows, fit_points.iter().map(|b| 0.5 * b[0] * b[0]));
        let col_scale: Vec<f64> = (0..cols).map(|j| 1.0 / m.column(j).norm().max(1e-300)).collect();
        let mut ms = m.clone();
        for (j, s) in col_scale.iter().enumerate() {
            ms.column_mut(j).scale_mut(*s);
        }
        let svd = ms.svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Solver("SVD did not return U".into()))?;
        let vt = svd.v_t.ok_or_else(|| Error::Solver("SVD did not return Vᵀ".into()))?;
        let smax = svd.singular_values.max();
        let keep: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > smax * 1e-13).collect();
        let v = DMatrix::from_fn(cols, keep.len(), |r, c| vt[(keep[c], r)]);
        let sigma: Vec<f64> = keep.iter().map(|&k| svd.singular_values[k]).collect();
        let mut ct = DVector::zeros(cols);
        for (c, &k) in keep.iter().enumerate() {
            let coef = u.column(k).dot(&g) / sigma[c];
            ct += v.column(c) * coef;
        }
        let coeffs: Vec<f64> = (0..cols).map(|j| ct[j] * col_scale[j]).collect();
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Solver("non-finite fundamental-solution coefficients".into()));
        }
        let mut model = MfsModel {
            d,
            kind: body.kind,
            eps,
            source_dirs,
            sources,
            coeffs,
            fit_dirs,
            fit_points,
            residual: f64::INFINITY,
            matrix: m,
            data: g,
            col_scale,
            v,
            sigma,
        };
        let check = check_directions(d, cfg.check_factor * n)?;
        let mut res: f64 = 0.0;
        for u in &check {
            let y = body.map(u)?;
            res = res.max(model.torsion_eval(&y).abs());
        }
        model.residual = res;
        Ok(model)
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    /// `φ̃(y)`.
    pub fn harmonic<T: Real>(&self, y: &[T]) -> T {
        let n = self.sources.len();
        let mut s = T::from_f64(self.coeffs[n]);
        let mut z = vec![T::zero(); self.d];
        for (c, src) in self.coeffs.iter().zip(&self.sources) {
            for k in 0..self.d {
                z[k] = y[k] - src[k];
            }
            s += fundamental(&z) * *c;
        }
        s
    }

    /// `∇φ̃(y)`.
    pub fn harmonic_grad<T: Real>(&self, y: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); self.d];
        let mut z = vec![T::zero(); self.d];
        for (c, src) in self.coeffs.iter().zip(&self.sources) {
            for k in 0..self.d {
                z[k] = y[k] - src[k];
            }
            for (gk, v) in g.iter_mut().zip(fundamental_grad(&z)) {
                *gk += v * *c;
            }
        }
        g
    }

    /// `u(y) = φ̃(y) − y₁²/2`.
    pub fn torsion_eval(&self, y: &[f64]) -> f64 {
        self.harmonic(y) - 0.5 * y[0] * y[0]
    }

    /// `∂_n u` at the boundary point `φ(x)`.
    pub fn torsion_normal_derivative<F: Sublinear + Clone>(&self, body: &ConvexBody<F>, x: &[f64]) -> Result<f64> {
        let fr = body.boundary_frame(x)?;
        let mut g = self.harmonic_grad(&fr.y);
        g[0] -= fr.y[0];
        Ok(g.iter().zip(&fr.n).map(|(a, b)| a * b).sum())
    }

    /// `∫_Ω u = ∫_B (u∘φ) Jac φ`.
    pub fn torsional_rigidity<F: Sublinear + Clone>(&self, body: &ConvexBody<F>, ball: &BallRule) -> Result<f64> {
        self.rigidity_grad(body, ball, None)
    }

    /// Torsional rigidity and, optionally, its gradient with respect to the
    /// body parameters (through both the integrand and the fit).
    pub fn rigidity_grad<F: Sublinear + Clone>(
        &self,
        body: &ConvexBody<F>,
        ball: &BallRule,
        grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        let func = RigidityFunctional { model: self, kind: body.kind, radial: &ball.radial };
        match grad {
            None => integrate_functional(&body.f, &ball.sphere.nodes, &ball.sphere.weights, &func, None),
            Some(grad) => {
                let t = integrate_functional(&body.f, &ball.sphere.nodes, &ball.sphere.weights, &func, Some(grad))?;
                // ∂T/∂c and the explicit source dependence at frozen positions
                let n = self.sources.len();
                let mut a = vec![0.0; n + 1];
                let mut sbar = vec![vec![0.0; self.d]; n];
                let mut z = vec![0.0; self.d];
                for (u, ws) in ball.sphere.nodes.iter().zip(&ball.sphere.weights) {
                    let jet = LocalJet::from_taylor(u, &body.f.taylor(u, body.kind.frame_order()));
                    let y1 = map_point(body.kind, &jet);
                    let jac = jac_point(body.kind, &jet);
                    for &(r, wr) in &ball.radial {
                        let w = ws * wr * jac;
                        a[n] += w;
                        for j in 0..n {
                            for k in 0..self.d {
                                z[k] = r * y1[k] - self.sources[j][k];
                            }
                            a[j] += w * fundamental(&z);
                            let gpsi = fundamental_grad(&z);
                            for k in 0..self.d {
                                sbar[j][k] -= w * self.coeffs[j] * gpsi[k];
                            }
                        }
                    }
                }
                self.pullback(body, &a, sbar, grad)?;
                Ok(t)
            }
        }
    }

    /// Accumulates into `grad` the parameter gradient of a functional
    /// `Q(c, s, θ)` through the least-squares fit, given `a = ∂Q/∂c` and the
    /// explicit cotangents `sbar_j = ∂Q/∂s_j` of the source positions.
    pub fn pullback<F: Sublinear + Clone>(
        &self,
        body: &ConvexBody<F>,
        a: &[f64],
        mut sbar: Vec<Vec<f64>>,
        grad: &mut [f64],
    ) -> Result<()> {
        let n = self.sources.len();
        let d = self.d;
        // λ = (MᵀM)⁺ a with M = M̃ D: λ = D V Σ⁻² Vᵀ D a
        let da = DVector::from_iterator(n + 1, a.iter().zip(&self.col_scale).map(|(x, s)| x * s));
        let mut lam = DVector::zeros(n + 1);
        for (c, s) in self.sigma.iter().enumerate() {
            let coef = self.v.column(c).dot(&da) / (s * s);
            lam += self.v.column(c) * coef;
        }
        for (j, s) in self.col_scale.iter().enumerate() {
            lam[j] *= s;
        }
        let c = DVector::from_column_slice(&self.coeffs);
        let r = &self.data - &self.matrix * &c;
        let mu = &self.matrix * &lam;
        let mut gbar = vec![vec![0.0; d]; self.fit_points.len()];
        let mut z = vec![0.0; d];
        for (i, b) in self.fit_points.iter().enumerate() {
            for j in 0..n {
                let om = r[i] * lam[j] - mu[i] * self.coeffs[j];
                for k in 0..d {
                    z[k] = b[k] - self.sources[j][k];
                }
                let gpsi = fundamental_grad(&z);
                for k in 0..d {
                    gbar[i][k] += om * gpsi[k];
                    sbar[j][k] -= om * gpsi[k];
                }
            }
            gbar[i][0] += mu[i] * b[0];
        }
        let ones_fit = vec![1.0; self.fit_dirs.len()];
        integrate_functional(
            &body.f,
            &self.fit_dirs,
            &ones_fit,
            &LinearMap { kind: body.kind, cot: &gbar, scale: 1.0 },
            Some(grad),
        )?;
        let scale = match body.kind {
            Kind::Gauge => 1.0 + self.eps,
            Kind::Support => 1.0,
        };
        let ones_src = vec![1.0; n];
        integrate_functional(
            &body.f,
            &self.source_dirs,
            &ones_src,
            &LinearMap { kind: body.kind, cot: &sbar, scale },
            Some(grad),
        )?;
        Ok(())
    }
}

/// Adaptive fit: doubles the sources and shrinks the offset by 0.7 until the
/// boundary residual drops below `tol`.
pub fn solve_torsion_mfs<F: Sublinear + Clone>(body: &ConvexBody<F>, cfg: &MfsConfig) -> Result<MfsModel> {
    if cfg.tol <= 0.0 || cfg.n0 == 0 || cfg.max_rounds == 0 || cfg.eps0 <= 0.0 {
        return Err(Error::Domain("MFS needs tol > 0, n0 ≥ 1, eps0 > 0 and max_rounds ≥ 1".into()));
    }
    let mut best: Option<MfsModel> = None;
    let (mut n, mut eps) = (cfg.n0, cfg.eps0);
    if cfg.n0 > cfg.max_sources {
        return Err(Error::Domain("n0 exceeds max_sources".into()));
    }
    for round in 0..cfg.max_rounds {
        let model = MfsModel::fit(body, n, eps, cfg)?;
        log::debug!("mfs round {round}: n = {n}, eps = {eps:.4}, residual = {:.3e}", model.residual);
        if model.residual <= cfg.tol {
            return Ok(model);
        }
        if best.as_ref().is_none_or(|b| model.residual < b.residual) {
            best = Some(model);
        }
        n *= 2;
        eps *= 0.7;
        if n > cfg.max_sources {
            break;
        }
    }
    let best = best.expect("at least one round");
    Err(Error::MfsConvergence { residual: best.residual, tol: cfg.tol, best: Box::new(best) })
}

struct LinearMap<'a> {
    kind: Kind,
    cot: &'a [Vec<f64>],
    scale: f64,
}

impl PointFunctional for LinearMap<'_> {
    fn order(&self) -> usize {
        self.kind.map_order()
    }
    fn eval<T: Real>(&self, node: usize, _: &[f64], jet: &LocalJet<T>) -> T {
        let y = map_point(self.kind, jet);
        let mut s = T::zero();
        for (a, b) in y.iter().zip(&self.cot[node]) {
            s += *a * *b;
        }
        s * self.scale
    }
}

struct RigidityFunctional<'a> {
    model: &'a MfsModel,
    kind: Kind,
    radial: &'a [(f64, f64)],
}

impl PointFunctional for RigidityFunctional<'_> {
    fn order(&self) -> usize {
        self.kind.frame_order()
    }
    fn eval<T: Real>(&self, _: usize, _: &[f64], jet: &LocalJet<T>) -> T {
        let y1 = map_point(self.kind, jet);
        let jac = jac_point(self.kind, jet);
        let mut s = T::zero();
        for &(r, wr) in self.radial {
            let y: Vec<T> = y1.iter().map(|&a| a * r).collect();
            let u = self.model.harmonic(&y) - y[0] * y[0] * 0.5;
            s += u * wr;
        }
        s * jac
    }
}

struct NormalDerivativeFunctional<'a> {
    model: &'a MfsModel,
    kind: Kind,
}

impl PointFunctional for NormalDerivativeFunctional<'_> {
    fn order(&self) -> usize {
        self.kind.frame_order()
    }
    fn eval<T: Real>(&self, _: usize, _: &[f64], jet: &LocalJet<T>) -> T {
        let fp = frame_point(self.kind, jet);
        let mut g = self.model.harmonic_grad(&fp.y);
        g[0] -= fp.y[0];
        let mut s = T::zero();
        for (a, b) in g.iter().zip(&fp.n) {
            s += *a * *b;
        }
        s
    }
}

/// `∂_n u` at `φ(x*)` and optionally its parameter gradient.
#[derive(Debug, Clone)]
pub struct TorsionGradientData {
    pub normal_derivative: f64,
    pub grad: Option<Vec<f64>>,
}

pub fn torsion_gradient_data<F: Sublinear + Clone>(
    body: &ConvexBody<F>,
    model: &MfsModel,
    x_star: &[f64],
    want_grad: bool,
) -> Result<TorsionGradientData> {
    let func = NormalDerivativeFunctional { model, kind: body.kind };
    let nodes = vec![x_star.to_vec()];
    if !want_grad {
        let q = integrate_functional(&body.f, &nodes, &[1.0], &func, None)?;
        return Ok(TorsionGradientData { normal_derivative: q, grad: None });
    }
    let mut grad = vec![0.0; body.f.num_params()];
    let q = integrate_functional(&body.f, &nodes, &[1.0], &func, Some(&mut grad))?;
    let fr = body.boundary_frame(x_star)?;
    let n = model.sources.len();
    let d = model.d;
    let mut a = vec![0.0; n + 1];
    let mut sbar = vec![vec![0.0; d]; n];
    let mut z = vec![0.0; d];
    for j in 0..n {
        for k in 0..d {
            z[k] = fr.y[k] - model.sources[j][k];
        }
        let gpsi = fundamental_grad(&z);
        a[j] = gpsi.iter().zip(&fr.n).map(|(p, q)| p * q).sum();
        let h = fundamental_hessian(&z);
        for k in 0..d {
            let hn: f64 = (0..d).map(|l| h[k * d + l] * fr.n[l]).sum();
            sbar[j][k] = -model.coeffs[j] * hn;
        }
    }
    model.pullback(body, &a, sbar, &mut grad)?;
    Ok(TorsionGradientData { normal_derivative: q, grad: Some(grad) })
}
