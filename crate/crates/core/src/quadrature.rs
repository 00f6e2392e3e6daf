//! Deterministic quadrature on the unit sphere and unit ball for `d ∈ {2, 3, 4}`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Surface area of `S^{d−1}`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => d as f64 * ball_volume(d),
    }
}

/// Volume of the unit ball in `ℝᵈ`.
pub fn ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * ball_volume(d - 2),
    }
}

#[derive(Debug, Clone)]
pub struct SphereRule {
    pub d: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BallRule {
    pub d: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Radial Gauss–Legendre nodes on `[0, 1]` and weights including `r^{d−1}`.
    pub radial: Vec<(f64, f64)>,
    pub sphere: SphereRule,
}

fn check_dim(d: usize) -> Result<()> {
    if (2..=4).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

/// Equal-weight rule with `n` nodes: equispaced angles (d = 2), a Fibonacci
/// lattice (d = 3), or a Kronecker sequence pushed through Hopf coordinates
/// (d = 4).
pub fn sphere_rule(d: usize, n: usize) -> Result<SphereRule> {
    check_dim(d)?;
    if n < 8 {
        return Err(Error::Domain(format!("sphere rule needs at least 8 nodes, got {n}")));
    }
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let nodes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let fi = i as f64;
            match d {
                2 => {
                    let t = 2.0 * PI * fi / n as f64;
                    vec![t.cos(), t.sin()]
                }
                3 => {
                    let z = 1.0 - (2.0 * fi + 1.0) / n as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let phi = 2.0 * PI * ((fi + 0.5) / golden).fract();
                    vec![rho * phi.cos(), rho * phi.sin(), z]
                }
                _ => {
                    // plastic-number R2 sequence for the two angles
                    let g = 1.324_717_957_244_746;
                    let a = (0.5 + fi / g).fract();
                    let b = (0.5 + fi / (g * g)).fract();
                    let t = (fi + 0.5) / n as f64;
                    let (s, c) = (t.sqrt(), (1.0 - t).sqrt());
                    let (a, b) = (2.0 * PI * a, 2.0 * PI * b);
                    vec![s * a.cos(), s * a.sin(), c * b.cos(), c * b.sin()]
                }
            }
        })
        .collect();
    let w = sphere_area(d) / n as f64;
    Ok(SphereRule { d, nodes, weights: vec![w; n] })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Product rule: Gauss–Legendre in the radius (with `r^{d−1}` absorbed) times
/// the given sphere rule.
pub fn ball_rule(d: usize, radial_n: usize, sphere: &SphereRule) -> Result<BallRule> {
    check_dim(d)?;
    if sphere.d != d {
        return Err(Error::Domain("sphere rule dimension mismatch".into()));
    }
    if radial_n < 2 {
        return Err(Error::Domain(format!("radial rule needs at least 2 nodes, got {radial_n}")));
    }
    let radial: Vec<(f64, f64)> = gauss_legendre(radial_n)
        .into_iter()
        .map(|(x, w)| {
            let r = 0.5 * (x + 1.0);
            (r, 0.5 * w * r.powi(d as i32 - 1))
        })
        .collect();
    let mut nodes = Vec::with_capacity(radial.len() * sphere.nodes.len());
    let mut weights = Vec::with_capacity(nodes.capacity());
    for &(r, wr) in &radial {
        for (u, &ws) in sphere.nodes.iter().zip(&sphere.weights) {
            nodes.push(u.iter().map(|c| r * c).collect());
            weights.push(wr * ws);
        }
    }
    Ok(BallRule { d, nodes, weights, radial, sphere: sphere.clone() })
}

/// Shared interface of the two rule types.
pub trait Rule {
    fn nodes(&self) -> &[Vec<f64>];
    fn weights(&self) -> &[f64];
}

impl Rule for SphereRule {
    fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Rule for BallRule {
    fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `Σ wᵢ f(xᵢ)` in node order.
pub fn integrate<R: Rule>(rule: &R, mut f: impl FnMut(&[f64]) -> f64) -> Result<f64> {
    let mut s = 0.0;
    for (i, (x, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        s += w * v;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_weights_and_norms() {
        for (d, n) in [(2, 100), (3, 2000), (4, 4096)] {
            let r = sphere_rule(d, n).unwrap();
            let total: f64 = r.weights.iter().sum();
            assert!((total / sphere_area(d) - 1.0).abs() < 1e-12);
            for x in &r.nodes {
                let nn: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((nn - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fibonacci_moments() {
        let r = sphere_rule(3, 2000).unwrap();
        let m2 = integrate(&r, |x| x[2] * x[2]).unwrap();
        assert!((m2 / (4.0 * PI / 3.0) - 1.0).abs() < 1e-3);
        let m1 = integrate(&r, |x| x[2]).unwrap();
        assert!(m1.abs() < 1e-3);
    }

    #[test]
    fn hopf_rule_moments() {
        let r = sphere_rule(4, 8192).unwrap();
        // ∫_{S³} x_k² = 2π²/4
        for k in 0..4 {
            let m = integrate(&r, |x| x[k] * x[k]).unwrap();
            assert!((m / (PI * PI / 2.0) - 1.0).abs() < 1e-3, "k={k} m={m}");
        }
    }

    #[test]
    fn ball_volumes_and_moments() {
        let s2 = sphere_rule(2, 64).unwrap();
        let b2 = ball_rule(2, 16, &s2).unwrap();
        let v: f64 = b2.weights.iter().sum();
        assert!((v - PI).abs() < 1e-12);
        let s3 = sphere_rule(3, 512).unwrap();
        let b3 = ball_rule(3, 8, &s3).unwrap();
        let m = integrate(&b3, |x| x.iter().map(|v| v * v).sum()).unwrap();
        assert!((m - 4.0 * PI / 5.0).abs() < 1e-8);
        let c = integrate(&b3, |_| 2.5).unwrap();
        assert!((c - 2.5 * 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_reduces_error() {
        // exact ∫_{S²} exp(x₁) = 4π sinh(1). Lattice errors oscillate under a
        // single doubling, so the check spans two doublings.
        let exact = 4.0 * PI * 1f64.sinh();
        let err = |n| (integrate(&sphere_rule(3, n).unwrap(), |x| x[0].exp()).unwrap() - exact).abs();
        for n in [128, 256, 512, 1024, 2048] {
            let (e0, e1) = (err(n), err(4 * n));
            assert!(e1 <= e0 / 2.0 || e0 < 1e-10, "n={n}: {e1} vs {e0}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(sphere_rule(5, 100), Err(Error::UnsupportedDimension(5))));
        assert!(sphere_rule(3, 4).is_err());
        let s = sphere_rule(2, 16).unwrap();
        assert!(ball_rule(2, 1, &s).is_err());
        assert!(matches!(integrate(&s, |_| f64::NAN), Err(Error::NonFinite { index: 0 })));
    }
}
