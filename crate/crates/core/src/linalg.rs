//! Small dense row-major matrices over any [`Real`] scalar.
//!
//! Sized for the `d × d` Jacobians of boundary maps (`d ≤ 4`); pivots are
//! chosen on primal values so every scalar type follows the same elimination.

use crate::autodiff::Real;

pub fn identity<T: Real>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
    }
    m
}

pub fn transpose<T: Real>(a: &[T], n: usize) -> Vec<T> {
    let mut t = a.to_vec();
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

pub fn matmul<T: Real>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn matvec<T: Real>(a: &[T], x: &[T], n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let mut s = T::zero();
            for j in 0..n {
                s += a[i * n + j] * x[j];
            }
            s
        })
        .collect()
}

/// `Aᵀ x`.
pub fn matvec_t<T: Real>(a: &[T], x: &[T], n: usize) -> Vec<T> {
    (0..n)
        .map(|j| {
            let mut s = T::zero();
            for i in 0..n {
                s += a[i * n + j] * x[i];
            }
            s
        })
        .collect()
}

/// LU factorization with partial pivoting. Returns the packed factors, the
/// row permutation and the permutation sign, or `None` on an exact zero pivot.
fn lu<T: Real>(a: &[T], n: usize) -> Option<(Vec<T>, Vec<usize>, f64)> {
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].value().abs();
        for r in col + 1..n {
            let v = m[r * n + col].value().abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            perm.swap(col, piv);
            sign = -sign;
        }
        let inv = m[col * n + col].recip();
        for r in col + 1..n {
            let f = m[r * n + col] * inv;
            m[r * n + col] = f;
            for j in col + 1..n {
                let u = m[col * n + j];
                m[r * n + j] -= f * u;
            }
        }
    }
    Some((m, perm, sign))
}

pub fn det<T: Real>(a: &[T], n: usize) -> T {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => match lu(a, n) {
            None => T::zero(),
            Some((m, _, sign)) => {
                let mut d = T::from_f64(sign);
                for i in 0..n {
                    d *= m[i * n + i];
                }
                d
            }
        },
    }
}

/// Solves `A x = b`.
pub fn solve<T: Real>(a: &[T], b: &[T], n: usize) -> Option<Vec<T>> {
    let (m, perm, _) = lu(a, n)?;
    let mut y: Vec<T> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            let l = m[i * n + j];
            let yj = y[j];
            y[i] -= l * yj;
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            let u = m[i * n + j];
            let yj = y[j];
            y[i] -= u * yj;
        }
        y[i] = y[i] / m[i * n + i];
    }
    Some(y)
}

pub fn inverse<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let (m, perm, _) = lu(a, n)?;
    let mut inv = vec![T::zero(); n * n];
    for c in 0..n {
        let mut y: Vec<T> = perm.iter().map(|&p| if p == c { T::one() } else { T::zero() }).collect();
        for i in 0..n {
            for j in 0..i {
                let l = m[i * n + j];
                let yj = y[j];
                y[i] -= l * yj;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = m[i * n + j];
                let yj = y[j];
                y[i] -= u * yj;
            }
            y[i] = y[i] / m[i * n + i];
        }
        for i in 0..n {
            inv[i * n + c] = y[i];
        }
    }
    Some(inv)
}

pub fn trace<T: Real>(a: &[T], n: usize) -> T {
    let mut s = T::zero();
    for i in 0..n {
        s += a[i * n + i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Dual;

    #[test]
    fn inverse_and_det_4x4() {
        let a = [4.0, 1.0, 0.5, 0.0, 1.0, 3.0, 0.2, 0.1, 0.5, 0.2, 2.0, 0.3, 0.0, 0.1, 0.3, 1.0];
        let inv = inverse(&a, 4).unwrap();
        let p = matmul(&a, &inv, 4);
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i * 4 + j] - e).abs() < 1e-14);
            }
        }
        let d3 = det(&[2.0, 0.0, 1.0, 1.0, 3.0, 0.0, 0.0, 1.0, 4.0], 3);
        assert!((d3 - 25.0).abs() < 1e-13);
        let perm = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 3.0];
        assert!((det(&perm, 4) + 6.0).abs() < 1e-14);
    }

    #[test]
    fn solve_matches_inverse() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let x = solve(&a, &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn determinant_derivative() {
        // d/dt det(A + tE) = tr(adj(A) E)
        let a = [3.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 4.0, 0.5, 0.0, 1.0, 0.2, 0.3, 0.1, 2.0];
        let mut da = [Dual::new(0.0, 0.0); 16];
        for i in 0..16 {
            da[i] = Dual::new(a[i], if i == 5 { 1.0 } else { 0.0 });
        }
        let d = det(&da, 4);
        let h = 1e-6;
        let mut ap = a;
        ap[5] += h;
        let mut am = a;
        am[5] -= h;
        let fd = (det(&ap, 4) - det(&am, 4)) / (2.0 * h);
        assert!((d.eps - fd).abs() < 1e-7);
    }
}
