//! The log-sum-exp sublinear network `p(x) = β‖x‖ LSE(Wᵀ x/‖x‖)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{Coeffs, JetSpace, ParameterVector, Real, ScalarField, Taylor, MAX_COEFFS};
use crate::error::{Error, Result};
use crate::quadrature::SphereRule;
use crate::sublinear::Sublinear;

/// Network parameters: `β = exp(s)` and the `d × m` matrix `W` stored
/// row-major, so direction `i` is the column `(W[0][i], …, W[d−1][i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SublinearNet {
    pub d: usize,
    pub m: usize,
    pub s: f64,
    pub w: Vec<f64>,
}

impl SublinearNet {
    pub fn new(d: usize, m: usize, s: f64, w: Vec<f64>) -> Result<Self> {
        if d == 0 || m == 0 || w.len() != d * m {
            return Err(Error::Domain(format!("weight matrix of length {} does not match d={d}, m={m}", w.len())));
        }
        Ok(SublinearNet { d, m, s, w })
    }

    /// Builds a net from direction vectors (the columns of `W`).
    pub fn from_directions(dirs: &[Vec<f64>], beta: f64) -> Result<Self> {
        if dirs.is_empty() || beta <= 0.0 {
            return Err(Error::Domain("need at least one direction and β > 0".into()));
        }
        let d = dirs[0].len();
        let m = dirs.len();
        let mut w = vec![0.0; d * m];
        for (i, v) in dirs.iter().enumerate() {
            for k in 0..d {
                w[k * m + i] = v[k];
            }
        }
        Self::new(d, m, beta.ln(), w)
    }

    /// `m` i.i.d. uniform unit directions with `β = 1`.
    pub fn random(d: usize, m: usize, rng: &mut impl Rng) -> Self {
        let dirs: Vec<Vec<f64>> = (0..m)
            .map(|_| loop {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if n > 1e-8 {
                    break v.iter().map(|a| a / n).collect();
                }
            })
            .collect();
        Self::from_directions(&dirs, 1.0).expect("valid random net")
    }

    /// Smoothed support function of the polytope with the given vertices:
    /// `W = β⁻¹[p₁ … p_m]`, so `0 ≤ p − h_P ≤ β log m` on the unit sphere.
    pub fn from_polytope_support(vertices: &[Vec<f64>], beta: f64) -> Result<Self> {
        let scaled: Vec<Vec<f64>> = vertices.iter().map(|v| v.iter().map(|a| a / beta).collect()).collect();
        Self::from_directions(&scaled, beta)
    }

    /// Smoothed gauge `max_i w_i·x` of the polytope with the given facet rows.
    pub fn from_polytope_gauge(normals: &[Vec<f64>], beta: f64) -> Result<Self> {
        Self::from_polytope_support(normals, beta)
    }

    pub fn beta(&self) -> f64 {
        self.s.exp()
    }

    pub fn direction(&self, i: usize) -> Vec<f64> {
        (0..self.d).map(|k| self.w[k * self.m + i]).collect()
    }

    pub fn parameter_vector(&self) -> ParameterVector {
        ParameterVector::flatten(self.s, &self.w)
    }

    pub fn set_parameter_vector(&mut self, p: &ParameterVector) -> Result<()> {
        let (s, w) = p.unflatten(self.d, self.m)?;
        self.s = s;
        self.w = w;
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::Domain(format!("expected {} coordinates", self.d)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite input".into()));
        }
        Ok(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// `p(x)`; `p(0) = 0`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let r = self.check_input(x)?;
        if r == 0.0 {
            return Ok(0.0);
        }
        Ok(self.value_at(x, r, None))
    }

    fn value_at(&self, x: &[f64], r: f64, g: Option<&[f64]>) -> f64 {
        let d = self.d;
        let mut u = [0.0; 4];
        match g {
            None => {
                for k in 0..d {
                    u[k] = x[k] / r;
                }
            }
            Some(g) => {
                for k in 0..d {
                    u[k] = (0..d).map(|a| g[k * d + a] * x[a]).sum::<f64>() / r;
                }
            }
        }
        let mut z = vec![0.0; self.m];
        for k in 0..d {
            let row = &self.w[k * self.m..(k + 1) * self.m];
            for (zi, wi) in z.iter_mut().zip(row) {
                *zi += wi * u[k];
            }
        }
        let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = z.iter().map(|zi| (zi - mx).exp()).sum();
        self.beta() * r * (s.ln() + mx)
    }

    fn local(&self, x: &[f64], order: usize) -> Result<Taylor> {
        let r = self.check_input(x)?;
        if r < 1e-12 {
            return Err(Error::Domain("derivatives requested at the origin".into()));
        }
        Ok(self.taylor(x, order))
    }

    pub fn eval_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.local(x, 1)?.gradient())
    }

    pub fn eval_hess(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.local(x, 2)?.hessian())
    }

    /// `D³p(x)[d1, d2, ·]`.
    pub fn eval_third(&self, x: &[f64], d1: &[f64], d2: &[f64]) -> Result<Vec<f64>> {
        let t = self.local(x, 3)?.third();
        let d = self.d;
        Ok((0..d)
            .map(|c| {
                let mut s = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        s += t[(a * d + b) * d + c] * d1[a] * d2[b];
                    }
                }
                s
            })
            .collect())
    }

    /// Rescales `β` so the quadrature mean of `p` over the sphere is 1.
    pub fn normalize_scale(&self, sphere: &SphereRule) -> Result<Self> {
        let mean = sphere_mean(self, sphere);
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::Init(format!("sphere mean of p is {mean}, cannot normalize")));
        }
        let mut out = self.clone();
        out.s -= mean.ln();
        Ok(out)
    }

    fn forward(&self, x: &[f64], order: usize, g: Option<&[f64]>) -> Forward {
        let d = self.d;
        let space = JetSpace::get(d, order);
        let len = space.len();
        let xs: Vec<Coeffs> = (0..d).map(|a| space.variable(x[a], a)).collect();
        let mut r2 = [0.0; MAX_COEFFS];
        for xa in &xs {
            let sq = space.mul(xa, xa);
            for k in 0..len {
                r2[k] += sq[k];
            }
        }
        let r = space.sqrt(&r2);
        let rinv = space.recip(&r);
        let u: Vec<Coeffs> = xs.iter().map(|xa| space.mul(xa, &rinv)).collect();
        let v: Vec<Coeffs> = match g {
            None => u,
            Some(g) => (0..d)
                .map(|k| {
                    let mut c = [0.0; MAX_COEFFS];
                    for a in 0..d {
                        let gk = g[k * d + a];
                        for j in 0..len {
                            c[j] += gk * u[a][j];
                        }
                    }
                    c
                })
                .collect(),
        };
        let mut z = vec![[0.0; MAX_COEFFS]; self.m];
        for k in 0..d {
            let row = &self.w[k * self.m..(k + 1) * self.m];
            for (zi, &wi) in z.iter_mut().zip(row) {
                for j in 0..len {
                    zi[j] += wi * v[k][j];
                }
            }
        }
        let mx = z.iter().map(|zi| zi[0]).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<Coeffs> = z.iter().map(|zi| space.exp_shifted(zi, mx)).collect();
        let mut s = [0.0; MAX_COEFFS];
        for ei in &e {
            for j in 0..len {
                s[j] += ei[j];
            }
        }
        let mut l = space.ln(&s);
        l[0] += mx;
        let q = space.mul(&r, &l);
        let beta = self.beta();
        let mut p = [0.0; MAX_COEFFS];
        for j in 0..len {
            p[j] = beta * q[j];
        }
        Forward { space, r, v, e, s_recip: space.recip(&s), q, p }
    }

    /// Accumulates `scale · ∂/∂θ Σ_α pbar_α p_α` into `grad`.
    fn backward(&self, f: &Forward, pbar: &Coeffs, scale: f64, grad: &mut [f64]) {
        let space = f.space;
        let len = space.len();
        let beta = self.beta();
        let mut sbar = 0.0;
        for j in 0..len {
            sbar += pbar[j] * f.p[j];
        }
        grad[0] += scale * sbar;
        let mut qbar = [0.0; MAX_COEFFS];
        for j in 0..len {
            qbar[j] = scale * beta * pbar[j];
        }
        let mut lbar = [0.0; MAX_COEFFS];
        space.mul_transpose(&qbar, &f.r, &mut lbar);
        let mut ssum = [0.0; MAX_COEFFS];
        space.mul_transpose(&lbar, &f.s_recip, &mut ssum);
        let m = self.m;
        for (i, ei) in f.e.iter().enumerate() {
            let mut zbar = [0.0; MAX_COEFFS];
            space.mul_transpose(&ssum, ei, &mut zbar);
            for k in 0..self.d {
                let mut acc = 0.0;
                for j in 0..len {
                    acc += zbar[j] * f.v[k][j];
                }
                grad[1 + k * m + i] += acc;
            }
        }
        let _ = f.q;
    }

    /// Generic evaluation with a max-shift chosen on primal values.
    fn eval_rotated<T: Real>(&self, x: &[T], g: Option<&[f64]>) -> T {
        let d = self.d;
        let r = crate::autodiff::norm(x);
        let u: Vec<T> = match g {
            None => x.iter().map(|&a| a / r).collect(),
            Some(g) => (0..d)
                .map(|k| {
                    let mut s = T::zero();
                    for a in 0..d {
                        s += x[a] * g[k * d + a];
                    }
                    s / r
                })
                .collect(),
        };
        let z: Vec<T> = (0..self.m)
            .map(|i| {
                let mut s = T::zero();
                for k in 0..d {
                    s += u[k] * self.w[k * self.m + i];
                }
                s
            })
            .collect();
        let mx = z.iter().map(Real::value).fold(f64::NEG_INFINITY, f64::max);
        let mut s = T::zero();
        for zi in &z {
            s += (*zi - mx).exp();
        }
        r * (s.ln() + mx) * self.beta()
    }

    /// Text serialization with round-trip exact `{:e}` formatting.
    pub fn to_text(&self, group: Option<&SymmetryGroup>) -> String {
        let mut out = String::new();
        out.push_str("sublinear-net 1\n");
        out.push_str(&format!("d {}\nm {}\ns {:e}\n", self.d, self.m, self.s));
        for k in 0..self.d {
            let row: Vec<String> = self.w[k * self.m..(k + 1) * self.m].iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&format!("w {}\n", row.join(" ")));
        }
        if let Some(g) = group {
            out.push_str(&format!("group {}\n", g.elements.len()));
            for e in &g.elements {
                let row: Vec<String> = e.iter().map(|v| format!("{v:e}")).collect();
                out.push_str(&format!("g {}\n", row.join(" ")));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<(Self, Option<SymmetryGroup>)> {
        let bad = |msg: &str| Error::Parse(format!("net file: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        if !lines.next().is_some_and(|l| l.trim() == "sublinear-net 1") {
            return Err(bad("missing header"));
        }
        let mut field = |key: &str| -> Result<String> {
            let l = lines.next().ok_or_else(|| bad(&format!("missing `{key}`")))?;
            let rest = l.strip_prefix(key).ok_or_else(|| bad(&format!("expected `{key}`, found `{l}`")))?;
            Ok(rest.trim().to_string())
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
        let d: usize = field("d ")?.parse().map_err(|_| bad("bad d"))?;
        let m: usize = field("m ")?.parse().map_err(|_| bad("bad m"))?;
        let s = num(&field("s ")?)?;
        let mut w = Vec::with_capacity(d * m);
        for _ in 0..d {
            let row = field("w ")?;
            for t in row.split_whitespace() {
                w.push(num(t)?);
            }
        }
        let net = SublinearNet::new(d, m, s, w)?;
        let group = match field("group ") {
            Err(_) => None,
            Ok(n) => {
                let n: usize = n.parse().map_err(|_| bad("bad group size"))?;
                let mut elements = Vec::with_capacity(n);
                for _ in 0..n {
                    let row = field("g ")?;
                    let e: Vec<f64> = row.split_whitespace().map(num).collect::<Result<_>>()?;
                    if e.len() != d * d {
                        return Err(bad("group element has wrong size"));
                    }
                    elements.push(e);
                }
                Some(SymmetryGroup::new(d, elements)?)
            }
        };
        Ok((net, group))
    }
}

struct Forward {
    space: &'static JetSpace,
    r: Coeffs,
    v: Vec<Coeffs>,
    e: Vec<Coeffs>,
    s_recip: Coeffs,
    q: Coeffs,
    p: Coeffs,
}

impl ScalarField for SublinearNet {
    fn dim(&self) -> usize {
        self.d
    }
    fn eval<T: Real>(&self, x: &[T]) -> T {
        self.eval_rotated(x, None)
    }
    fn is_singular(&self, x: &[f64]) -> bool {
        crate::autodiff::norm(x) < 1e-12
    }
}

impl Sublinear for SublinearNet {
    fn num_params(&self) -> usize {
        1 + self.d * self.m
    }
    fn params(&self) -> Vec<f64> {
        self.parameter_vector().0
    }
    fn with_params(&self, theta: &[f64]) -> Self {
        let mut out = self.clone();
        out.set_parameter_vector(&ParameterVector(theta.to_vec())).expect("parameter length");
        out
    }
    fn value(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            0.0
        } else {
            self.value_at(x, r, None)
        }
    }
    fn taylor(&self, x: &[f64], order: usize) -> Taylor {
        let f = self.forward(x, order, None);
        Taylor { dim: self.d, order, c: f.p }
    }
    fn taylor_pullback(
        &self,
        x: &[f64],
        order: usize,
        cot: &mut dyn FnMut(&Taylor) -> Coeffs,
        grad: &mut [f64],
    ) -> Taylor {
        let f = self.forward(x, order, None);
        let t = Taylor { dim: self.d, order, c: f.p };
        let bar = cot(&t);
        self.backward(&f, &bar, 1.0, grad);
        t
    }
}

/// A finite group of orthogonal matrices (row-major `d × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryGroup {
    pub d: usize,
    pub elements: Vec<Vec<f64>>,
}

impl SymmetryGroup {
    /// Validates orthogonality, identity membership and closure.
    pub fn new(d: usize, elements: Vec<Vec<f64>>) -> Result<Self> {
        let g = SymmetryGroup { d, elements };
        g.validate()?;
        Ok(g)
    }

    pub fn trivial(d: usize) -> Self {
        SymmetryGroup { d, elements: vec![crate::linalg::identity::<f64>(d)] }
    }

    /// Rotations by multiples of `2π/n` in the `(x₁, x₂)` plane.
    pub fn cyclic(d: usize, n: usize) -> Result<Self> {
        if n == 0 || d < 2 {
            return Err(Error::Domain("cyclic group needs n ≥ 1 and d ≥ 2".into()));
        }
        let elements = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let mut e = crate::linalg::identity::<f64>(d);
                e[0] = t.cos();
                e[1] = -t.sin();
                e[d] = t.sin();
                e[d + 1] = t.cos();
                e
            })
            .collect();
        Self::new(d, elements)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    fn find(&self, m: &[f64]) -> Option<usize> {
        self.elements.iter().position(|e| e.iter().zip(m).all(|(a, b)| (a - b).abs() <= 1e-12))
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if self.elements.iter().any(|e| e.len() != d * d) {
            return Err(Error::Domain("group element has wrong size".into()));
        }
        if self.find(&crate::linalg::identity::<f64>(d)).is_none() {
            return Err(Error::Domain("group does not contain the identity".into()));
        }
        for e in &self.elements {
            let t = crate::linalg::transpose(e, d);
            let p = crate::linalg::matmul(&t, e, d);
            let id = crate::linalg::identity::<f64>(d);
            if p.iter().zip(&id).any(|(a, b)| (a - b).abs() > 1e-12) {
                return Err(Error::Domain("group element is not orthogonal".into()));
            }
            if self.find(&t).is_none() {
                return Err(Error::Domain("group is not closed under inversion".into()));
            }
            for f in &self.elements {
                if self.find(&crate::linalg::matmul(e, f, d)).is_none() {
                    return Err(Error::Domain("group is not closed under multiplication".into()));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, k: usize, x: &[f64]) -> Vec<f64> {
        crate::linalg::matvec(&self.elements[k], x, self.d)
    }
}

/// Orbit average `p^G(x) = |G|⁻¹ Σ_g p(g x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizedNet {
    pub base: SublinearNet,
    pub group: SymmetryGroup,
}

impl SymmetrizedNet {
    pub fn new(base: SublinearNet, group: SymmetryGroup) -> Result<Self> {
        if base.d != group.d {
            return Err(Error::Domain("group and net dimensions differ".into()));
        }
        Ok(SymmetrizedNet { base, group })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.base.check_input(x)?;
        Ok(self.value(x))
    }

    pub fn normalize_scale(&self, sphere: &SphereRule) -> Result<Self> {
        let mean = sphere_mean(self, sphere);
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::Init(format!("sphere mean of p is {mean}, cannot normalize")));
        }
        let mut out = self.clone();
        out.base.s -= mean.ln();
        Ok(out)
    }
}

impl ScalarField for SymmetrizedNet {
    fn dim(&self) -> usize {
        self.base.d
    }
    fn eval<T: Real>(&self, x: &[T]) -> T {
        let mut s = T::zero();
        for g in &self.group.elements {
            s += self.base.eval_rotated(x, Some(g));
        }
        s / self.group.len() as f64
    }
    fn is_singular(&self, x: &[f64]) -> bool {
        crate::autodiff::norm(x) < 1e-12
    }
}

impl Sublinear for SymmetrizedNet {
    fn num_params(&self) -> usize {
        self.base.num_params()
    }
    fn params(&self) -> Vec<f64> {
        self.base.params()
    }
    fn with_params(&self, theta: &[f64]) -> Self {
        SymmetrizedNet { base: self.base.with_params(theta), group: self.group.clone() }
    }
    fn value(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return 0.0;
        }
        let s: f64 = self.group.elements.iter().map(|g| self.base.value_at(x, r, Some(g))).sum();
        s / self.group.len() as f64
    }
    fn taylor(&self, x: &[f64], order: usize) -> Taylor {
        let n = self.group.len() as f64;
        let mut c = [0.0; MAX_COEFFS];
        for g in &self.group.elements {
            let f = self.base.forward(x, order, Some(g));
            for j in 0..f.space.len() {
                c[j] += f.p[j] / n;
            }
        }
        Taylor { dim: self.base.d, order, c }
    }
    fn taylor_pullback(
        &self,
        x: &[f64],
        order: usize,
        cot: &mut dyn FnMut(&Taylor) -> Coeffs,
        grad: &mut [f64],
    ) -> Taylor {
        let n = self.group.len() as f64;
        let fwds: Vec<Forward> = self.group.elements.iter().map(|g| self.base.forward(x, order, Some(g))).collect();
        let mut c = [0.0; MAX_COEFFS];
        for f in &fwds {
            for j in 0..f.space.len() {
                c[j] += f.p[j] / n;
            }
        }
        let t = Taylor { dim: self.base.d, order, c };
        let bar = cot(&t);
        for f in &fwds {
            self.base.backward(f, &bar, 1.0 / n, grad);
        }
        t
    }
}

fn sphere_mean<F: Sublinear>(f: &F, sphere: &SphereRule) -> f64 {
    let total: f64 = sphere.weights.iter().sum();
    sphere.nodes.iter().zip(&sphere.weights).map(|(x, w)| w * f.value(x)).sum::<f64>() / total
}

/// `true` iff `p ≥ eps` at every node of the rule.
pub fn validate_positive<F: Sublinear>(f: &F, sphere: &SphereRule, eps: f64) -> bool {
    sphere.nodes.iter().all(|x| f.value(x) >= eps)
}

/// Smallest value of `p` over the rule's nodes.
pub fn min_on_sphere<F: Sublinear>(f: &F, sphere: &SphereRule) -> f64 {
    sphere.nodes.iter().map(|x| f.value(x)).fold(f64::INFINITY, f64::min)
}
