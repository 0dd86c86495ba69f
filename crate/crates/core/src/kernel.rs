//! Smoothing kernels used to weight forward gradients and to build density
//! estimates.

use crate::error::{check_dim, finite, Error, Result};
use crate::numeric::{increment, linspace, trapezoid_weights};
use crate::param::norm_sq;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt::Debug;

/// A nonnegative, symmetric kernel on `R^N` that integrates to one.
pub trait SmoothingKernel: Send + Sync + Debug {
    /// Dimension `N`.
    fn dim(&self) -> usize;
    /// `K(u)`.
    fn eval(&self, u: &[f64]) -> f64;
    /// `sup_u K(u)`.
    fn sup_value(&self) -> f64;
    /// `K` along a ray from the origin, `r >= 0`.
    fn radial_profile(&self, r: f64) -> f64;
    /// `int |u|^2 K(u) du`.
    fn second_moment(&self) -> f64;
    /// `int |K(u)| du`.
    fn l1_mass(&self) -> f64 {
        1.0
    }
    /// Length scale beyond which the kernel is negligible, in units of `u`.
    fn scale_hint(&self) -> f64 {
        1.0
    }
    /// `Delta^{-N} K(u / Delta)`.
    fn eval_scaled(&self, u: &[f64], delta: f64) -> f64 {
        let v: Vec<f64> = u.iter().map(|x| x / delta).collect();
        self.eval(&v) / libm::pow(delta, self.dim() as f64)
    }
}

/// Standard Gaussian kernel `(2 pi)^{-N/2} exp(-|u|^2 / 2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    dim: usize,
    peak: f64,
}

impl GaussianKernel {
    /// Kernel on `R^dim`.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(GaussianKernel { dim, peak: libm::pow(2.0 * PI, -0.5 * dim as f64) })
    }
}

impl SmoothingKernel for GaussianKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, u: &[f64]) -> f64 {
        self.peak * libm::exp(-0.5 * norm_sq(u))
    }

    fn sup_value(&self) -> f64 {
        self.peak
    }

    fn radial_profile(&self, r: f64) -> f64 {
        self.peak * libm::exp(-0.5 * r * r)
    }

    fn second_moment(&self) -> f64 {
        self.dim as f64
    }

    fn eval_scaled(&self, u: &[f64], delta: f64) -> f64 {
        let n = self.dim as f64;
        self.peak * libm::exp(-0.5 * norm_sq(u) / (delta * delta) - n * libm::log(delta))
    }
}

/// Checked `Delta^{-N} K(u / Delta)`.
pub fn kernel_eval_scaled(kernel: &dyn SmoothingKernel, delta: f64, u: &[f64]) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta", "kernel scale must be positive and finite"));
    }
    check_dim(kernel.dim(), u.len())?;
    finite(kernel.eval_scaled(u, delta), "scaled kernel")
}

/// Outcome of [`kernel_spec_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct KernelCheckReport {
    /// Integral over the quadrature box.
    pub integral: f64,
    /// `|integral - 1| <= 1e-6`.
    pub integral_ok: bool,
    /// No negative value on the grid.
    pub nonnegative: bool,
    /// `K(u) = K(-u)` on the grid.
    pub symmetric: bool,
    /// Largest grid value.
    pub grid_max: f64,
    /// Grid maximum is finite and does not exceed the declared supremum.
    pub sup_ok: bool,
    /// `int |u|^2 K` over the box.
    pub second_moment: f64,
    /// Second moment has converged between the half box and the full box.
    pub second_moment_ok: bool,
}

impl KernelCheckReport {
    /// Every property holds.
    pub fn passed(&self) -> bool {
        self.integral_ok && self.nonnegative && self.symmetric && self.sup_ok && self.second_moment_ok
    }
}

/// Verifies the kernel properties by tensor quadrature for `N <= 3`.
pub fn kernel_spec_check(kernel: &dyn SmoothingKernel) -> Result<KernelCheckReport> {
    let n = kernel.dim();
    let points = match n {
        1 => 4001,
        2 => 401,
        3 => 121,
        _ => return Err(Error::invalid("dim", "quadrature check supports N <= 3")),
    };
    let r = 10.0 * kernel.scale_hint();
    let axis = linspace(-r, r, points);
    let w = trapezoid_weights(&axis);
    let axes = vec![axis.clone(); n];
    let mut idx = vec![0usize; n];
    let mut u = vec![0.0; n];
    let mut neg = vec![0.0; n];
    let (mut integral, mut m2_full, mut m2_half) = (0.0, 0.0, 0.0);
    let (mut nonnegative, mut symmetric) = (true, true);
    let mut grid_max = f64::NEG_INFINITY;
    loop {
        let mut weight = 1.0;
        let mut inner = true;
        for d in 0..n {
            u[d] = axis[idx[d]];
            neg[d] = axis[points - 1 - idx[d]];
            weight *= w[idx[d]];
            inner &= u[d].abs() <= 0.5 * r;
        }
        let k = kernel.eval(&u);
        if !k.is_finite() {
            return Err(Error::NonFinite("kernel value"));
        }
        nonnegative &= k >= 0.0;
        let k_neg = kernel.eval(&neg);
        symmetric &= (k - k_neg).abs() <= 1e-12 * k.abs().max(1e-300);
        grid_max = grid_max.max(k);
        integral += weight * k;
        let m2 = weight * norm_sq(&u) * k.abs();
        m2_full += m2;
        if inner {
            m2_half += m2;
        }
        if !increment(&mut idx, &axes) {
            break;
        }
    }
    let sup = kernel.sup_value();
    Ok(KernelCheckReport {
        integral,
        integral_ok: (integral - 1.0).abs() <= 1e-6,
        nonnegative,
        symmetric,
        grid_max,
        sup_ok: sup.is_finite() && grid_max <= sup * (1.0 + 1e-12),
        second_moment: m2_full,
        second_moment_ok: m2_full.is_finite() && (m2_full - m2_half).abs() <= 1e-3 * m2_full.max(1e-300),
    })
}
