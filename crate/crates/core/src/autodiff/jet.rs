//! Truncated multivariate Taylor polynomials.
//!
//! A jet stores the Taylor coefficients `c_α = ∂^α f(x₀) / α!` of a function
//! of `d ≤ 4` variables for all multi-indices with `|α| ≤ order ≤ 3`. The
//! products needed by the network (exp, log and reciprocal series) are driven
//! by a precomputed multiplication table per `(d, order)`. Each operation also
//! has a transposed form so that cotangents on output coefficients can be
//! pulled back through the computation by hand.

use std::sync::OnceLock;

pub const MAX_DIM: usize = 4;
pub const MAX_ORDER: usize = 3;
/// Number of monomials of degree ≤ 3 in 4 variables.
pub const MAX_COEFFS: usize = 35;

pub type Coeffs = [f64; MAX_COEFFS];

/// Monomial layout and product table for one `(dim, order)` pair.
#[derive(Debug)]
pub struct JetSpace {
    pub dim: usize,
    pub order: usize,
    /// Exponent vectors, sorted by total degree.
    pub monomials: Vec<[u8; MAX_DIM]>,
    /// `(i, j, k)`: monomial `i` times monomial `j` is monomial `k`.
    pub products: Vec<(u8, u8, u8)>,
    /// `α!` for every monomial.
    pub factorials: Vec<f64>,
    /// Index of each unit monomial `e_a`.
    pub linear: [usize; MAX_DIM],
}

impl JetSpace {
    fn build(dim: usize, order: usize) -> Self {
        let mut monomials = Vec::new();
        for deg in 0..=order {
            let mut exps = [0u8; MAX_DIM];
            enumerate(dim, deg, 0, &mut exps, &mut monomials);
        }
        let index_of = |e: &[u8; MAX_DIM]| monomials.iter().position(|m| m == e);
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                let mut s = [0u8; MAX_DIM];
                for k in 0..MAX_DIM {
                    s[k] = a[k] + b[k];
                }
                if let Some(k) = index_of(&s) {
                    products.push((i as u8, j as u8, k as u8));
                }
            }
        }
        let factorials =
            monomials.iter().map(|m| m.iter().map(|&e| (1..=e as u32).product::<u32>() as f64).product()).collect();
        let mut linear = [usize::MAX; MAX_DIM];
        for a in 0..dim {
            let mut e = [0u8; MAX_DIM];
            e[a] = 1;
            if let Some(k) = index_of(&e) {
                linear[a] = k;
            }
        }
        JetSpace { dim, order, monomials, products, factorials, linear }
    }

    /// Shared table for `dim ∈ 1..=4`, `order ∈ 0..=3`.
    pub fn get(dim: usize, order: usize) -> &'static JetSpace {
        static SPACES: OnceLock<Vec<JetSpace>> = OnceLock::new();
        assert!((1..=MAX_DIM).contains(&dim) && order <= MAX_ORDER, "unsupported jet space");
        let all = SPACES.get_or_init(|| {
            let mut v = Vec::new();
            for d in 1..=MAX_DIM {
                for o in 0..=MAX_ORDER {
                    v.push(JetSpace::build(d, o));
                }
            }
            v
        });
        &all[(dim - 1) * (MAX_ORDER + 1) + order]
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Index of the monomial with the given exponents, if within the order.
    pub fn index(&self, exps: &[u8; MAX_DIM]) -> Option<usize> {
        self.monomials.iter().position(|m| m == exps)
    }

    /// The jet of the coordinate function `x_a` around `x0`.
    pub fn variable(&self, x0: f64, a: usize) -> Coeffs {
        let mut c = [0.0; MAX_COEFFS];
        c[0] = x0;
        if self.order >= 1 {
            c[self.linear[a]] = 1.0;
        }
        c
    }

    /// `out = a * b`, truncated.
    pub fn mul(&self, a: &Coeffs, b: &Coeffs) -> Coeffs {
        let mut out = [0.0; MAX_COEFFS];
        for &(i, j, k) in &self.products {
            out[k as usize] += a[i as usize] * b[j as usize];
        }
        out
    }

    /// Transposed product: given the cotangent `bar` of `a * b` with `b`
    /// held fixed, accumulate the cotangent of `a` into `out`.
    pub fn mul_transpose(&self, bar: &Coeffs, b: &Coeffs, out: &mut Coeffs) {
        for &(i, j, k) in &self.products {
            out[i as usize] += bar[k as usize] * b[j as usize];
        }
    }

    /// Power series `Σ_k coeffs[k] h^k` of the nilpotent part `h = a - a₀`.
    fn series(&self, a: &Coeffs, coeffs: &[f64]) -> Coeffs {
        let mut h = *a;
        h[0] = 0.0;
        let mut out = [0.0; MAX_COEFFS];
        out[0] = coeffs[0];
        let mut pow = h;
        for (k, &ck) in coeffs.iter().enumerate().skip(1) {
            if k > self.order {
                break;
            }
            if k > 1 {
                pow = self.mul(&pow, &h);
            }
            for (o, p) in out.iter_mut().zip(pow.iter()).take(self.len()) {
                *o += ck * p;
            }
        }
        out
    }

    pub fn exp(&self, a: &Coeffs) -> Coeffs {
        let e = a[0].exp();
        self.series(a, &[e, e, e / 2.0, e / 6.0])
    }

    /// `exp(a - shift)`, used for max-shifted log-sum-exp.
    pub fn exp_shifted(&self, a: &Coeffs, shift: f64) -> Coeffs {
        let e = (a[0] - shift).exp();
        self.series(a, &[e, e, e / 2.0, e / 6.0])
    }

    pub fn ln(&self, a: &Coeffs) -> Coeffs {
        let inv = 1.0 / a[0];
        self.series(a, &[a[0].ln(), inv, -inv * inv / 2.0, inv * inv * inv / 3.0])
    }

    pub fn recip(&self, a: &Coeffs) -> Coeffs {
        let inv = 1.0 / a[0];
        self.series(a, &[inv, -inv * inv, inv * inv * inv, -inv * inv * inv * inv])
    }

    pub fn sqrt(&self, a: &Coeffs) -> Coeffs {
        let s = a[0].sqrt();
        let inv = 1.0 / a[0];
        self.series(a, &[s, 0.5 * s * inv, -0.125 * s * inv * inv, 0.0625 * s * inv * inv * inv])
    }

    /// Symmetric derivative tensor entry `∂_{idx} f` from Taylor coefficients.
    pub fn derivative(&self, c: &Coeffs, idx: &[usize]) -> f64 {
        let mut e = [0u8; MAX_DIM];
        for &a in idx {
            e[a] += 1;
        }
        let k = self.index(&e).expect("derivative order exceeds jet order");
        c[k] * self.factorials[k]
    }
}

fn enumerate(dim: usize, remaining: usize, pos: usize, exps: &mut [u8; MAX_DIM], out: &mut Vec<[u8; MAX_DIM]>) {
    if pos == dim - 1 {
        exps[pos] = remaining as u8;
        out.push(*exps);
        exps[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[pos] = e as u8;
        enumerate(dim, remaining - e, pos + 1, exps, out);
    }
    exps[pos] = 0;
}

/// The Taylor expansion of a scalar function at a point.
#[derive(Debug, Clone, Copy)]
pub struct Taylor {
    pub dim: usize,
    pub order: usize,
    pub c: Coeffs,
}

impl Taylor {
    pub fn space(&self) -> &'static JetSpace {
        JetSpace::get(self.dim, self.order)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn gradient(&self) -> Vec<f64> {
        let s = self.space();
        (0..self.dim).map(|a| self.c[s.linear[a]]).collect()
    }

    /// Full symmetric Hessian, row-major.
    pub fn hessian(&self) -> Vec<f64> {
        let s = self.space();
        let d = self.dim;
        let mut h = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                h[a * d + b] = s.derivative(&self.c, &[a, b]);
            }
        }
        h
    }

    /// Full third-derivative tensor, index `(a * d + b) * d + c`.
    pub fn third(&self) -> Vec<f64> {
        let s = self.space();
        let d = self.dim;
        let mut t = vec![0.0; d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    t[(a * d + b) * d + c] = s.derivative(&self.c, &[a, b, c]);
                }
            }
        }
        t
    }
}

#[cfg(test)]
#[allow(clippy::identity_op, clippy::erasing_op)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(JetSpace::get(2, 3).len(), 10);
        assert_eq!(JetSpace::get(3, 3).len(), 20);
        assert_eq!(JetSpace::get(4, 3).len(), 35);
        assert_eq!(JetSpace::get(3, 1).len(), 4);
        assert_eq!(JetSpace::get(2, 0).len(), 1);
    }

    #[test]
    fn polynomial_product_exact() {
        // (1 + x + y) * (2 + x y) around the origin in 2 variables, order 3
        let s = JetSpace::get(2, 3);
        let x = s.variable(0.0, 0);
        let y = s.variable(0.0, 1);
        let mut a = [0.0; MAX_COEFFS];
        for k in 0..s.len() {
            a[k] = x[k] + y[k];
        }
        a[0] += 1.0;
        let mut b = s.mul(&x, &y);
        b[0] += 2.0;
        let p = s.mul(&a, &b);
        let t = Taylor { dim: 2, order: 3, c: p };
        // p = 2 + 2x + 2y + xy + x^2 y + x y^2
        assert!((t.value() - 2.0).abs() < 1e-15);
        assert_eq!(t.gradient(), vec![2.0, 2.0]);
        let h = t.hessian();
        assert_eq!(h, vec![0.0, 1.0, 1.0, 0.0]);
        let th = t.third();
        // ∂xxy = 2, ∂xyy = 2
        assert!((th[(0 * 2) * 2 + 1] - 2.0).abs() < 1e-15);
        assert!((th[(1 * 2) * 2 + 1] - 2.0).abs() < 1e-15);
        assert!(th[0].abs() < 1e-15);
    }

    #[test]
    fn exp_and_ln_series_match_derivatives() {
        // f(x, y) = exp(x + 2 y) at (0.3, -0.1): all derivatives known
        let s = JetSpace::get(2, 3);
        let (x0, y0) = (0.3, -0.1);
        let x = s.variable(x0, 0);
        let y = s.variable(y0, 1);
        let mut a = [0.0; MAX_COEFFS];
        for k in 0..s.len() {
            a[k] = x[k] + 2.0 * y[k];
        }
        let e = Taylor { dim: 2, order: 3, c: s.exp(&a) };
        let v = (x0 + 2.0 * y0).exp();
        let th = e.third();
        assert!((th[(0 * 2 + 1) * 2 + 1] - 4.0 * v).abs() < 1e-12);
        assert!((th[(1 * 2 + 1) * 2 + 1] - 8.0 * v).abs() < 1e-12);

        // ln(exp(a)) = a
        let l = s.ln(&e.c);
        for k in 0..s.len() {
            assert!((l[k] - a[k]).abs() < 1e-12, "coefficient {k}");
        }
        let r = s.mul(&s.recip(&e.c), &e.c);
        assert!((r[0] - 1.0).abs() < 1e-14);
        for k in 1..s.len() {
            assert!(r[k].abs() < 1e-12);
        }
        let q = s.sqrt(&e.c);
        let qq = s.mul(&q, &q);
        for k in 0..s.len() {
            assert!((qq[k] - e.c[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_is_adjoint_of_product() {
        let s = JetSpace::get(3, 3);
        let mut a = [0.0; MAX_COEFFS];
        let mut b = [0.0; MAX_COEFFS];
        let mut bar = [0.0; MAX_COEFFS];
        for k in 0..s.len() {
            a[k] = (k as f64 * 0.37).sin();
            b[k] = (k as f64 * 0.91).cos();
            bar[k] = (k as f64 * 1.3).sin();
        }
        // <bar, a*b> == <mul_transpose(bar, b), a>
        let ab = s.mul(&a, &b);
        let lhs: f64 = (0..s.len()).map(|k| bar[k] * ab[k]).sum();
        let mut abar = [0.0; MAX_COEFFS];
        s.mul_transpose(&bar, &b, &mut abar);
        let rhs: f64 = (0..s.len()).map(|k| abar[k] * a[k]).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
