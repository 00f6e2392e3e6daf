//! Forward mode with many tangents at once.
//!
//! Used to differentiate per-point geometric formulas with respect to the
//! handful of local Taylor coefficients of the underlying sublinear function
//! (at most 35 of them: order 3 in dimension 4).

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use super::real::Real;

pub const MAX_TANGENTS: usize = 35;

#[derive(Debug, Clone, Copy)]
pub struct MultiDual {
    pub v: f64,
    pub t: [f64; MAX_TANGENTS],
    /// Number of leading tangent slots that may be non-zero.
    pub n: u8,
}

impl MultiDual {
    pub fn constant(v: f64) -> Self {
        Self { v, t: [0.0; MAX_TANGENTS], n: 0 }
    }

    /// Independent input number `slot` out of `count`.
    pub fn input(v: f64, slot: usize, count: usize) -> Self {
        debug_assert!(slot < count && count <= MAX_TANGENTS);
        let mut t = [0.0; MAX_TANGENTS];
        t[slot] = 1.0;
        Self { v, t, n: count as u8 }
    }

    pub fn tangents(&self) -> &[f64] {
        &self.t[..self.n as usize]
    }

    #[inline]
    fn map(self, f: f64, df: f64) -> Self {
        let mut out = Self { v: f, t: [0.0; MAX_TANGENTS], n: self.n };
        for k in 0..self.n as usize {
            out.t[k] = self.t[k] * df;
        }
        out
    }

    #[inline]
    fn combine(a: &Self, ca: f64, b: &Self, cb: f64, v: f64) -> Self {
        let n = a.n.max(b.n);
        let mut out = Self { v, t: [0.0; MAX_TANGENTS], n };
        for k in 0..n as usize {
            out.t[k] = a.t[k] * ca + b.t[k] * cb;
        }
        out
    }
}

impl Add for MultiDual {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::combine(&self, 1.0, &rhs, 1.0, self.v + rhs.v)
    }
}

impl Sub for MultiDual {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::combine(&self, 1.0, &rhs, -1.0, self.v - rhs.v)
    }
}

impl Mul for MultiDual {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::combine(&self, rhs.v, &rhs, self.v, self.v * rhs.v)
    }
}

impl Div for MultiDual {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let q = self.v * inv;
        Self::combine(&self, inv, &rhs, -q * inv, q)
    }
}

impl Neg for MultiDual {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.map(-self.v, -1.0)
    }
}

impl Add<f64> for MultiDual {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl Sub<f64> for MultiDual {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: f64) -> Self {
        self.v -= rhs;
        self
    }
}

impl Mul<f64> for MultiDual {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: f64) -> Self {
        self.map(self.v * rhs, rhs)
    }
}

impl Div<f64> for MultiDual {
    type Output = Self;
    #[inline]
    fn div(self, rhs: f64) -> Self {
        self.map(self.v / rhs, 1.0 / rhs)
    }
}

impl AddAssign for MultiDual {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for MultiDual {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for MultiDual {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Real for MultiDual {
    fn from_f64(v: f64) -> Self {
        Self::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.map(e, e)
    }
    fn ln(self) -> Self {
        self.map(self.v.ln(), 1.0 / self.v)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.map(s, 0.5 / s)
    }
    fn sin(self) -> Self {
        self.map(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.map(self.v.cos(), -self.v.sin())
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        self.map(self.v.powi(n), n as f64 * self.v.powi(n - 1))
    }
    fn powf(self, p: f64) -> Self {
        self.map(self.v.powf(p), p * self.v.powf(p - 1.0))
    }
}
