//! Forward-mode dual numbers.
//!
//! `Dual<T>` carries a value and one directional derivative. The coefficient
//! type is itself any [`Real`], so `Dual<Dual<Dual<f64>>>` propagates mixed
//! derivatives up to third order along three independently seeded directions.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use super::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Real> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    pub fn constant(re: T) -> Self {
        Self { re, eps: T::zero() }
    }

    /// An independent variable with unit tangent.
    pub fn variable(re: T) -> Self {
        Self { re, eps: T::one() }
    }

    /// Applies a scalar function given its value and derivative at `re`.
    #[inline]
    fn chain(self, f: T, df: T) -> Self {
        Self { re: f, eps: self.eps * df }
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self { re: self.re + rhs.re, eps: self.eps + rhs.eps }
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self { re: self.re - rhs.re, eps: self.eps - rhs.eps }
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self { re: self.re * rhs.re, eps: self.eps * rhs.re + self.re * rhs.eps }
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = rhs.re.recip();
        let q = self.re * inv;
        Self { re: q, eps: (self.eps - q * rhs.eps) * inv }
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { re: -self.re, eps: -self.eps }
    }
}

impl<T: Real> Add<f64> for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: f64) -> Self {
        Self { re: self.re + rhs, eps: self.eps }
    }
}

impl<T: Real> Sub<f64> for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: f64) -> Self {
        Self { re: self.re - rhs, eps: self.eps }
    }
}

impl<T: Real> Mul<f64> for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        Self { re: self.re * rhs, eps: self.eps * rhs }
    }
}

impl<T: Real> Div<f64> for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        Self { re: self.re / rhs, eps: self.eps / rhs }
    }
}

impl<T: Real> AddAssign for Dual<T> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Real> SubAssign for Dual<T> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Real> MulAssign for Dual<T> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<T: Real> Real for Dual<T> {
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v))
    }

    fn value(&self) -> f64 {
        self.re.value()
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }

    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, (s * 2.0).recip())
    }

    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::one(),
            1 => self,
            _ => self.chain(self.re.powi(n), self.re.powi(n - 1) * n as f64),
        }
    }

    fn powf(self, p: f64) -> Self {
        self.chain(self.re.powf(p), self.re.powf(p - 1.0) * p)
    }
}

/// Nested dual used for third-order directional derivatives.
pub type Dual3 = Dual<Dual<Dual<f64>>>;

/// Seeds `x + t1 d1 + t2 d2 + t3 d3` as a third-order nested dual point.
pub fn seed3(x: &[f64], d1: &[f64], d2: &[f64], d3: &[f64]) -> Vec<Dual3> {
    (0..x.len())
        .map(|k| {
            let inner = |a: f64, b: f64| Dual::new(a, b);
            let lvl1 = Dual::new(inner(x[k], d1[k]), inner(d2[k], 0.0));
            let lvl1_eps = Dual::new(inner(d3[k], 0.0), inner(0.0, 0.0));
            Dual::new(lvl1, lvl1_eps)
        })
        .collect()
}

/// The coefficient of `t1 t2 t3` in a seeded nested dual result.
pub fn third_coefficient(v: &Dual3) -> f64 {
    v.eps.eps.eps
}
