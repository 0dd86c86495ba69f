//! Small numerical helpers: quadrature, root finding, linear solves.

use crate::error::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i + 1 == n { hi } else { lo + h * i as f64 }).collect()
        }
    }
}

/// Trapezoid weights for the nodes `xs`.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (xs[i] - xs[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

/// Trapezoid rule for samples `ys` at nodes `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    trapezoid_weights(xs).iter().zip(ys).map(|(w, y)| w * y).sum()
}

/// Tensor-product trapezoid rule over a rectangular grid.
///
/// `values` is stored row-major with the last axis varying fastest.
pub fn trapezoid_nd(axes: &[Vec<f64>], values: &[f64]) -> f64 {
    let weights: Vec<Vec<f64>> = axes.iter().map(|a| trapezoid_weights(a)).collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; axes.len()];
    for v in values {
        let w: f64 = idx.iter().enumerate().map(|(d, &i)| weights[d][i]).product();
        total += w * v;
        increment(&mut idx, axes);
    }
    total
}

/// Advances a row-major multi-index; returns false after wrapping.
pub fn increment(idx: &mut [usize], axes: &[Vec<f64>]) -> bool {
    for d in (0..idx.len()).rev() {
        idx[d] += 1;
        if idx[d] < axes[d].len() {
            return true;
        }
        idx[d] = 0;
    }
    false
}

/// Bisection for a root of `f` on `[lo, hi]`, assuming a sign change.
pub fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::precondition("bisection interval does not bracket a root"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) < tol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximizes `f` on `[lo, hi]`: dense scan followed by golden-section refinement.
///
/// Returns `(argmax, max)`.
pub fn maximize_1d(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = 2001;
    let xs = linspace(lo, hi, n);
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let v = f(x);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(n - 1)];
    let g = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v >= best_v {
        (x, v)
    } else {
        (xs[best], best_v)
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is row-major `n x n`.
pub fn solve_linear(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: a.len() });
    }
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return Err(Error::Singular);
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            b.swap(piv, col);
        }
        let p = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r * n + c] * x[c];
        }
        x[r] = s / a[r * n + r];
    }
    Ok(x)
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + libm::log1p(libm::exp(-(a - b).abs()))
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
