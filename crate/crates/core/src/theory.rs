//! Closed-form constants, parameter schedules and error bounds.
//!
//! Every function here is pure. Quantities that can exceed the `f64` range
//! are carried in log space and surfaced as [`Error::Overflow`].

use crate::cost::StructuralInput;
use crate::dist::BaseDistribution;
use crate::error::{finite, Error, Result};
use crate::kernel::SmoothingKernel;
use crate::numeric::{bisect, linspace, log_add_exp, maximize_1d, trapezoid};
use alloc::format;
use alloc::vec;
use core::f64::consts::{PI, SQRT_2};

/// Default Bakry universal constant.
pub const DEFAULT_C_UNIVERSAL: f64 = 1.0;
/// Default tail radius `M` in the Lyapunov constant.
pub const DEFAULT_TAIL_RADIUS: f64 = 1.0;

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(name: &'static str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("must be nonnegative and finite, got {v}")))
    }
}

/// `kappa_0 = ln E exp(|X|^2)` for `X ~ N(0, sigma2 I_N)`.
pub fn compute_kappa0(sigma2: f64, dim: usize) -> Result<f64> {
    nonnegative("sigma2", sigma2)?;
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    if sigma2 >= 0.5 {
        return Err(Error::invalid("sigma2", "exp(|x|^2) is not integrable for sigma2 >= 1/2"));
    }
    Ok(-0.5 * dim as f64 * libm::log1p(-2.0 * sigma2))
}

/// `kappa_0` by trapezoid quadrature of `exp(x^2) pi(x)` for a 1-D density.
pub fn kappa0_quadrature(dist: &dyn BaseDistribution) -> Result<f64> {
    if dist.dim() != 1 {
        return Err(Error::invalid("dist", "quadrature is implemented for dimension 1"));
    }
    let f = |x: f64| libm::exp(x * x) * dist.density(&[x]);
    let peak = f(0.0).max(f64::MIN_POSITIVE);
    let mut r = 8.0 * dist.scale_hint().max(1e-6);
    while f(r).max(f(-r)) > 1e-18 * peak {
        r *= 2.0;
        if r > 1e4 {
            return Err(Error::precondition("exp(|x|^2) pi(x) does not decay; kappa_0 is infinite"));
        }
    }
    let xs = linspace(-r, r, 40_001);
    let ys: vec::Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    finite(libm::log(trapezoid(&xs, &ys)), "kappa_0 quadrature")
}

/// `(I, I')`: suprema of `|<x, grad pi_0>|` and `|<x, pi_0 grad pi_0>|`.
///
/// Evaluated along the first coordinate ray, exact for radially symmetric
/// densities.
pub fn compute_i_constants(dist: &dyn BaseDistribution) -> (f64, f64) {
    let n = dist.dim();
    let ray = |r: f64| {
        let mut x = vec![0.0; n];
        x[0] = r;
        x
    };
    let hi = 20.0 * dist.scale_hint().max(1e-12);
    let (_, i) = maximize_1d(0.0, hi, |r| {
        let x = ray(r);
        (r * dist.grad_density(&x)[0]).abs()
    });
    let (_, ip) = maximize_1d(0.0, hi, |r| {
        let x = ray(r);
        (r * dist.density(&x) * dist.grad_density(&x)[0]).abs()
    });
    (i, ip)
}

/// Closed form of `I` for `N(0, sigma2 I_N)`.
pub fn gaussian_i_closed_form(sigma2: f64, dim: usize) -> f64 {
    2.0 * libm::exp(-1.0) * libm::pow(2.0 * PI * sigma2, -0.5 * dim as f64)
}

/// Closed form of `I'` for `N(0, sigma2 I_N)`.
pub fn gaussian_i_prime_closed_form(sigma2: f64, dim: usize) -> f64 {
    libm::exp(-1.0) * libm::pow(2.0 * PI * sigma2, -(dim as f64))
}

/// Uniform second-moment bound `M_theta` on the forward iterates.
pub fn compute_m_theta(kappa0: f64, m: f64, b: f64, b_grad: f64) -> f64 {
    kappa0 + 2.0 * 1f64.max(1.0 / m) * (b + 2.0 * b_grad * b_grad)
}

/// Algorithm-side inputs to the constants.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmInput {
    /// Re-initialization threshold of the forward learner.
    pub c_opt: f64,
    /// Lower bound on the conditional gradient-noise variance.
    pub mu_sgd_hat: f64,
    /// Inverse temperature.
    pub beta: f64,
    /// Passive step size.
    pub epsilon: f64,
    /// Scale of the sampling distribution.
    pub gamma: f64,
    /// Bakry universal constant.
    pub c_universal: f64,
    /// Tail radius `M` in the Lyapunov constant.
    pub tail_radius: f64,
}

impl AlgorithmInput {
    /// Inputs with the default universal constant and tail radius.
    pub fn new(c_opt: f64, mu_sgd_hat: f64, beta: f64, epsilon: f64, gamma: f64) -> Self {
        AlgorithmInput {
            c_opt,
            mu_sgd_hat,
            beta,
            epsilon,
            gamma,
            c_universal: DEFAULT_C_UNIVERSAL,
            tail_radius: DEFAULT_TAIL_RADIUS,
        }
    }
}

/// Every scalar the bounds depend on.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralConstants {
    /// Cost-side constants.
    pub input: StructuralInput,
    /// Re-initialization threshold.
    pub c_opt: f64,
    /// Lower bound on the conditional gradient-noise variance.
    pub mu_sgd_hat: f64,
    /// `M_theta`.
    pub m_theta: f64,
    /// `kappa_0`.
    pub kappa0: f64,
    /// `I`.
    pub i_const: f64,
    /// `I'`.
    pub i_prime: f64,
    /// Inverse temperature.
    pub beta: f64,
    /// Bakry universal constant.
    pub c_universal: f64,
    /// Tail radius `M`.
    pub tail_radius: f64,
    /// `sup pi_0`.
    pub sup_base: f64,
    /// `sup pi_{0,gamma}`.
    pub sup_scaled: f64,
    /// Passive step size.
    pub epsilon: f64,
}

impl StructuralConstants {
    /// Derives `I`, `I'`, `M_theta` and the suprema from a base density and a
    /// precomputed `kappa_0`.
    pub fn assemble(input: StructuralInput, alg: &AlgorithmInput, base: &dyn BaseDistribution, kappa0: f64) -> Result<Self> {
        input.validate()?;
        if base.dim() != input.dim {
            return Err(Error::DimensionMismatch { expected: input.dim, got: base.dim() });
        }
        positive("gamma", alg.gamma)?;
        let (i_const, i_prime) = compute_i_constants(base);
        let sup_base = base.sup_density();
        let sup_scaled = sup_base / libm::pow(alg.gamma, input.dim as f64);
        let m_theta = compute_m_theta(kappa0, input.m, input.b, input.b_grad);
        let sc = StructuralConstants {
            input,
            c_opt: alg.c_opt,
            mu_sgd_hat: alg.mu_sgd_hat,
            m_theta,
            kappa0,
            i_const,
            i_prime,
            beta: alg.beta,
            c_universal: alg.c_universal,
            tail_radius: alg.tail_radius,
            sup_base,
            sup_scaled,
            epsilon: alg.epsilon,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// [`Self::assemble`] for a Gaussian base `N(0, sigma2 I_N)` with closed-form `kappa_0`.
    pub fn gaussian(input: StructuralInput, alg: &AlgorithmInput, sigma2: f64) -> Result<Self> {
        let kappa0 = compute_kappa0(sigma2, input.dim)?;
        let base = crate::dist::GaussianBase::new(input.dim, sigma2)?;
        Self::assemble(input, alg, &base, kappa0)
    }

    /// Checks signs and finiteness.
    pub fn validate(&self) -> Result<()> {
        self.input.validate()?;
        positive("c_opt", self.c_opt)?;
        positive("mu_sgd_hat", self.mu_sgd_hat)?;
        positive("beta", self.beta)?;
        positive("epsilon", self.epsilon)?;
        positive("c_universal", self.c_universal)?;
        positive("sup_base", self.sup_base)?;
        positive("sup_scaled", self.sup_scaled)?;
        nonnegative("tail_radius", self.tail_radius)?;
        nonnegative("M_theta", self.m_theta)?;
        nonnegative("kappa0", self.kappa0)?;
        nonnegative("I", self.i_const)?;
        nonnegative("I_prime", self.i_prime)?;
        Ok(())
    }
}

/// `C0` through `C5`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CConstants {
    /// Second-moment bound on the noisy gradient.
    pub c0: f64,
    /// `C1`.
    pub c1: f64,
    /// `C2`.
    pub c2: f64,
    /// Initial relative-entropy bound.
    pub c3: f64,
    /// `C4`.
    pub c4: f64,
    /// `C5`.
    pub c5: f64,
}

/// Evaluates `C0..C5`.
pub fn compute_c_constants(sc: &StructuralConstants) -> Result<CConstants> {
    sc.validate()?;
    let s = &sc.input;
    let (l, lj, bb, beta, n) = (s.l_grad_j, s.l_j, s.b_grad, sc.beta, s.dim as f64);
    let c0 = 3.0 * l * l * (sc.m_theta + 2.0 * bb * bb * sc.m_theta) + bb * bb + s.zeta;
    let c1 = sc.kappa0 + (beta * s.b + n) * 2.0 * sc.epsilon + 2.0 * sc.i_prime;
    let c2 = beta * l * l * (72.0 * c0 + 6.0 * libm::sqrt(c0) + 18.0 + SQRT_2);
    let c3 = libm::log(sc.sup_scaled)
        + 0.5 * n * libm::log(3.0 * PI / (s.m * beta))
        + 0.5 * beta * s.b * libm::log(3.0)
        + beta * (l * sc.kappa0 / 3.0 + bb * libm::sqrt(sc.kappa0) + s.a);
    let c5 = (1.0 / sc.c_opt) / sc.mu_sgd_hat + 1.0 / (sc.c_opt * sc.c_opt);
    let c4 = 6.0 * libm::sqrt(12.0 * c0 + 3.0)
        + 3.0 * SQRT_2
        + 4.0
            * libm::sqrt(1.5 + c1)
            * (libm::sqrt(2.0 * beta * c5 * l * l * c2) + 2.0 * libm::sqrt(2.0 * beta * c5 * (lj * lj + s.zeta)));
    for (what, v) in [("C0", c0), ("C1", c1), ("C2", c2), ("C3", c3), ("C4", c4), ("C5", c5)] {
        finite(v, what)?;
    }
    Ok(CConstants { c0, c1, c2, c3, c4, c5 })
}

/// Kernel moments and the curvature constant entering the density estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdeConstants {
    /// `sup K`.
    pub k1: f64,
    /// `int |K|`.
    pub k2: f64,
    /// `beta L_gradJ + beta^2 L_J^2`.
    pub k3: f64,
    /// `int |u|^2 K(u) du`.
    pub k4: f64,
}

impl KdeConstants {
    /// Reads the kernel moments and forms `K3`.
    pub fn new(kernel: &dyn SmoothingKernel, beta: f64, l_grad_j: f64, l_j: f64) -> Self {
        KdeConstants {
            k1: kernel.sup_value(),
            k2: kernel.l1_mass(),
            k3: kernel_k3(beta, l_grad_j, l_j),
            k4: kernel.second_moment(),
        }
    }
}

/// `K3 = beta L_gradJ + beta^2 L_J^2`.
pub fn kernel_k3(beta: f64, l_grad_j: f64, l_j: f64) -> f64 {
    beta * l_grad_j + beta * beta * l_j * l_j
}

/// Lipschitz constant of the log transform above the density floor, `exp(beta T1)`.
pub fn log_lipschitz(beta: f64, t1: f64) -> f64 {
    libm::exp(beta * t1)
}

/// Uniform deviation level `beta_{x,T}` of the density estimate.
///
/// `p_theta` is the acceptance fraction `|S|/T`.
pub fn beta_x_t(x: f64, t: f64, b_t: f64, p_theta: f64, dim: usize, kc: &KdeConstants) -> Result<f64> {
    positive("T", t)?;
    positive("b_T", b_t)?;
    positive("P_Theta", p_theta)?;
    let n = dim as f64;
    let rt = libm::sqrt(t);
    let v = x / (rt * b_t)
        + kc.k2 / (libm::pow(2.0 * PI, n) * rt * b_t)
        + 0.5 * kc.k3 * kc.k4 * libm::pow(b_t * libm::sqrt(1.0 / p_theta), 2.0 / n);
    finite(v, "beta_{x,T}")
}

/// `C6 = (K1/b_T + beta_{x,T}) max 1/(exp(-beta T1) |Theta|)`.
pub fn compute_c6(kc: &KdeConstants, b_t: f64, beta_xt: f64, beta: f64, t1: f64, theta_volume: f64) -> Result<f64> {
    positive("b_T", b_t)?;
    positive("|Theta|", theta_volume)?;
    let a = kc.k1 / b_t + beta_xt;
    let b = libm::exp(beta * t1) / theta_volume;
    finite(a.max(b), "C6")
}

/// Lyapunov, Poincare and log-Sobolev constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogSobolev {
    /// Lyapunov drift constant `kappa`.
    pub kappa: f64,
    /// Lyapunov rate `gamma`.
    pub gamma_lyap: f64,
    /// Bound on `1/lambda`.
    pub poincare_inv: f64,
    /// `ln(1/lambda)`.
    pub ln_poincare_inv: f64,
    /// Log-Sobolev constant.
    pub c_ls: f64,
    /// `ln c_LS`.
    pub ln_c_ls: f64,
}

/// Evaluates `kappa`, `gamma`, `1/lambda` and `c_LS` in log space.
pub fn compute_log_sobolev(sc: &StructuralConstants) -> Result<LogSobolev> {
    sc.validate()?;
    let s = &sc.input;
    let (beta, m, n, l, bb) = (sc.beta, s.m, s.dim as f64, s.l_grad_j, s.b_grad);
    let bm = beta * m;
    let mm = m * sc.tail_radius;
    let kappa = 0.5 * bm * n + bm * sc.i_const + 0.5 * (beta * beta * m * s.b + (beta * mm) * (beta * mm));
    let p0 = sc.sup_base;
    let gamma = 0.5 * (bm * bm + (1.0 - 1.0 / (p0 * p0 + 1.0)));
    positive("kappa", kappa)?;
    positive("gamma", gamma)?;
    let ln_inner = libm::log(4.0 * sc.c_universal * kappa * kappa / gamma)
        + beta * ((l + bb) * kappa / gamma + s.a + bb);
    let ln_poincare_inv = -libm::log(2.0 * kappa) + log_add_exp(0.0, ln_inner);
    let pi_bar = sc.sup_scaled;
    let q = (2.0 * beta * l / gamma)
        * (kappa + gamma * (sc.kappa0 + ((beta * s.b + n) * pi_bar + 2.0 * sc.i_const) / (m * beta * pi_bar)))
        + 2.0;
    let head = 2.0 * beta * l / gamma + 2.0 / (beta * l);
    let ln_c_ls = log_add_exp(libm::log(head), ln_poincare_inv + libm::log(q));
    if !ln_c_ls.is_finite() {
        return Err(Error::NonFinite("c_LS"));
    }
    if ln_poincare_inv >= f64::MAX.ln() {
        return Err(Error::Overflow { what: "Poincare constant 1/lambda", log_value: ln_poincare_inv });
    }
    if ln_c_ls >= f64::MAX.ln() {
        return Err(Error::Overflow { what: "log-Sobolev constant", log_value: ln_c_ls });
    }
    Ok(LogSobolev {
        kappa,
        gamma_lyap: gamma,
        poincare_inv: libm::exp(ln_poincare_inv),
        ln_poincare_inv,
        c_ls: libm::exp(ln_c_ls),
        ln_c_ls,
    })
}

/// All constants reported together.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundConstants {
    /// `C0..C5`.
    pub c: CConstants,
    /// `C6`.
    pub c6: f64,
    /// Lyapunov and functional-inequality constants.
    pub ls: LogSobolev,
}

impl BoundConstants {
    /// `c_LS`.
    pub fn c_ls(&self) -> f64 {
        self.ls.c_ls
    }
}

/// Assembles [`BoundConstants`] from the structural constants and a precomputed `C6`.
pub fn compute_bound_constants(sc: &StructuralConstants, c6: f64) -> Result<BoundConstants> {
    Ok(BoundConstants { c: compute_c_constants(sc)?, c6: positive("C6", c6)?, ls: compute_log_sobolev(sc)? })
}

/// Largest admissible `delta`, `exp(-1/(beta c_LS))`.
pub fn delta_max(beta: f64, c_ls: f64) -> f64 {
    libm::exp(-1.0 / (beta * c_ls))
}

/// Step size, iteration count, kernel scale and sampling scale for a target `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    /// Target accuracy.
    pub delta: f64,
    /// Passive step size.
    pub epsilon: f64,
    /// Passive iterations per stream.
    pub k: u64,
    /// Kernel scale `Delta`.
    pub kernel_delta: f64,
    /// Sampling-distribution scale.
    pub gamma: f64,
    /// Set when the kernel-scale condition admits only `Delta = 0`.
    pub kernel_delta_degenerate: bool,
}

/// Computes the schedule and checks its own invariants.
pub fn schedule_from_delta(delta: f64, beta: f64, c_ls: f64, kernel: &dyn SmoothingKernel) -> Result<Schedule> {
    positive("beta", beta)?;
    positive("c_LS", c_ls)?;
    let dmax = delta_max(beta, c_ls);
    if !(delta > 0.0 && delta <= dmax && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0, {dmax}], got {delta}")));
    }
    let ln_inv = -libm::log(delta);
    let r = delta / ln_inv;
    let epsilon = (r * r).min(1.0);
    let kf = libm::ceil(beta * c_ls * ln_inv / epsilon);
    if !(kf.is_finite() && kf < u64::MAX as f64) {
        return Err(Error::Overflow { what: "iteration count k", log_value: libm::log(kf) });
    }
    let k = (kf as u64).max(1);
    let gamma = libm::pow(epsilon, 1.5);
    let (kernel_delta, kernel_delta_degenerate) = kernel_delta_bound(epsilon, kernel)?;
    let s = Schedule { delta, epsilon, k, kernel_delta, gamma, kernel_delta_degenerate };
    check_schedule(&s, beta, c_ls)?;
    Ok(s)
}

fn check_schedule(s: &Schedule, beta: f64, c_ls: f64) -> Result<()> {
    let r = s.delta / -libm::log(s.delta);
    if !(s.epsilon > 0.0 && s.epsilon <= 1.0 && s.epsilon <= r * r * (1.0 + 1e-12)) {
        return Err(Error::precondition("schedule: step size outside its band"));
    }
    let e2 = s.epsilon * s.epsilon;
    let e15 = libm::pow(s.epsilon, 1.5);
    if !(s.gamma >= e2 * (1.0 - 1e-12) && s.gamma <= e15 * (1.0 + 1e-12)) {
        return Err(Error::precondition("schedule: sampling scale outside its band"));
    }
    let target = beta * c_ls * -libm::log(s.delta);
    let ke = s.k as f64 * s.epsilon;
    if !(ke >= target * (1.0 - 1e-12) && ke - target <= s.epsilon * (1.0 + 1e-9) + 1e-12 * target) {
        return Err(Error::precondition("schedule: k * epsilon does not match its target"));
    }
    if !(s.kernel_delta >= 0.0 && s.kernel_delta.is_finite()) {
        return Err(Error::precondition("schedule: kernel scale is not finite"));
    }
    Ok(())
}

fn check_monotone(kernel: &dyn SmoothingKernel) -> Result<()> {
    let rs = linspace(0.0, 40.0 * kernel.scale_hint(), 4001);
    let mut prev = kernel.radial_profile(0.0);
    for &r in &rs[1..] {
        let v = kernel.radial_profile(r);
        if !(v <= prev * (1.0 + 1e-12)) || v < 0.0 {
            return Err(Error::precondition(format!("kernel radial profile is not nonincreasing at r = {r}")));
        }
        prev = v;
    }
    Ok(())
}

/// Radius `r >= 0` with `profile(r) = v`; `None` when `v` exceeds the peak.
fn invert_profile(kernel: &dyn SmoothingKernel, v: f64) -> Result<Option<f64>> {
    let k0 = kernel.radial_profile(0.0);
    if v > k0 {
        return Ok(None);
    }
    if v == k0 {
        return Ok(Some(0.0));
    }
    if v <= 0.0 {
        return Ok(Some(f64::INFINITY));
    }
    let mut hi = kernel.scale_hint().max(1e-12);
    while kernel.radial_profile(hi) > v {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(Some(f64::INFINITY));
        }
    }
    let r = bisect(0.0, hi, |r| kernel.radial_profile(r) - v, 1e-14 * hi)?;
    Ok(Some(r))
}

/// Largest kernel scale `Delta` allowed at step size `epsilon`.
///
/// The inverse of `K` and `K^2` is taken on the radial profile. Returns
/// `(Delta, degenerate)`; `degenerate` is set when some grid point has no
/// preimage, in which case only `Delta = 0` satisfies the condition.
pub fn kernel_delta_bound(epsilon: f64, kernel: &dyn SmoothingKernel) -> Result<(f64, bool)> {
    positive("epsilon", epsilon)?;
    check_monotone(kernel)?;
    let n = kernel.dim() as f64;
    let k0 = kernel.radial_profile(0.0);
    let k_hat_1 = kernel.sup_value();
    let k_hat_eps = k_hat_1 / libm::pow(epsilon, n);
    if k_hat_eps < epsilon {
        return Ok((0.0, true));
    }
    let m = 1001;
    let (la, lb) = (libm::log(epsilon), libm::log(k_hat_eps));
    let mut best = f64::INFINITY;
    for i in 0..m {
        let x = libm::exp(la + (lb - la) * i as f64 / (m - 1) as f64);
        let num_arg = k_hat_1 * libm::sqrt(2.0 * PI) / (2.0 * epsilon) * libm::exp(0.5 * x * x);
        let den_arg = libm::sqrt(x * libm::pow(epsilon, 2.0 * n));
        let (Some(rn), Some(rd)) = (invert_profile(kernel, num_arg)?, invert_profile(kernel, den_arg)?) else {
            return Ok((0.0, true));
        };
        if den_arg > k0 || rd == 0.0 {
            continue;
        }
        best = best.min(rn / rd);
    }
    if best.is_finite() {
        Ok((best, false))
    } else {
        Ok((0.0, true))
    }
}

/// Stationary-law Wasserstein bound
/// `delta [C4 + sqrt(2 c_LS C3)] + delta sqrt(10 c_LS N ln(1/delta))`.
///
/// A negative `C3` is replaced by zero, since it bounds a relative entropy.
pub fn wasserstein_bound(delta: f64, c3: f64, c4: f64, c_ls: f64, dim: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    nonnegative("c_LS", c_ls)?;
    let n = dim as f64;
    let first = delta * (c4 + libm::sqrt(2.0 * c_ls * c3.max(0.0)));
    let second = delta * libm::sqrt(10.0 * c_ls * n * -libm::log(delta));
    finite(first + second, "Wasserstein bound")
}

/// Inputs of the reconstruction concentration bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionInput {
    /// Deviation level `x`.
    pub x: f64,
    /// Sample-count slack `y`.
    pub y: f64,
    /// Number of sampler streams `T`.
    pub t: f64,
    /// Base bandwidth `b_T`.
    pub b_t: f64,
    /// Wasserstein radius `rho`.
    pub rho: f64,
    /// Coupling mass `xi`.
    pub xi: f64,
    /// `|Theta|`.
    pub theta_volume: f64,
    /// Lipschitz constant of the log transform.
    pub lipschitz: f64,
    /// Acceptance fraction `P_Theta`.
    pub p_theta: f64,
    /// Dimension.
    pub dim: usize,
    /// `C6`.
    pub c6: f64,
    /// Kernel constants.
    pub kde: KdeConstants,
}

/// Value of the reconstruction bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionBound {
    /// Error level `phi`.
    pub phi: f64,
    /// `psi`.
    pub psi: f64,
    /// Probability that the L1 error exceeds `phi`.
    pub tail: f64,
    /// Set when the tail probability carries no information.
    pub vacuous: bool,
}

/// Smallest admissible `x`, `rho sqrt(2 C6) / (sqrt(xi) |Theta|)`.
pub fn reconstruction_x_min(rho: f64, c6: f64, xi: f64, theta_volume: f64) -> f64 {
    rho * libm::sqrt(2.0 * c6) / (libm::sqrt(xi) * theta_volume)
}

/// Evaluates `phi`, `psi` and the tail probability.
pub fn reconstruction_bound(inp: &ReconstructionInput) -> Result<ReconstructionBound> {
    positive("T", inp.t)?;
    positive("b_T", inp.b_t)?;
    positive("xi", inp.xi)?;
    positive("|Theta|", inp.theta_volume)?;
    positive("L", inp.lipschitz)?;
    positive("P_Theta", inp.p_theta)?;
    positive("C6", inp.c6)?;
    nonnegative("rho", inp.rho)?;
    nonnegative("y", inp.y)?;
    let x_min = reconstruction_x_min(inp.rho, inp.c6, inp.xi, inp.theta_volume);
    let tol = 1e-12 * x_min.max(f64::MIN_POSITIVE);
    if inp.x < x_min - tol {
        return Err(Error::precondition(format!("x = {} is below the validity threshold {x_min}", inp.x)));
    }
    let n = inp.dim as f64;
    let rt = libm::sqrt(inp.t);
    let kc = &inp.kde;
    let phi = 2.0
        * inp.lipschitz
        * inp.theta_volume
        * (inp.x / (rt * inp.b_t)
            + kc.k2 / (libm::pow(2.0 * PI, n) * rt * inp.b_t)
            + 0.5 * kc.k3 * kc.k4 * libm::pow(inp.b_t * libm::sqrt(1.0 / inp.p_theta + inp.y), 2.0 / n));
    let at_boundary = (inp.x - x_min).abs() <= tol;
    let psi = if at_boundary {
        0.0
    } else {
        (inp.x * inp.theta_volume * libm::sqrt(inp.xi) - libm::sqrt(2.0 * inp.c6) * inp.rho)
            / (libm::sqrt(inp.xi) * inp.theta_volume * libm::sqrt(inp.b_t))
    };
    let t3 = inp.t * inp.t * inp.t;
    let tail = 1.0 - (1.0 - 2.0 * libm::exp(-psi * psi)) * (1.0 - 2.0 * libm::exp(-2.0 * inp.y * inp.y / t3));
    finite(phi, "phi")?;
    finite(tail, "tail probability")?;
    Ok(ReconstructionBound { phi, psi, tail, vacuous: at_boundary || tail >= 1.0 })
}

/// Lower bound on the coupling mass, `min((alpha - rho / margin^2)^2, 1)`.
pub fn xi_lower_bound(alpha: f64, rho: f64, margin: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    nonnegative("rho", rho)?;
    if !(margin.is_finite() && margin > libm::sqrt(rho / alpha)) {
        return Err(Error::precondition(format!("margin {margin} must exceed sqrt(rho / alpha) = {}", libm::sqrt(rho / alpha))));
    }
    let d = alpha - rho / (margin * margin);
    Ok((d * d).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::GaussianBase;
    use crate::kernel::GaussianKernel;

    fn quad_input() -> StructuralInput {
        StructuralInput { l_j: 4.0, l_grad_j: 1.0, m: 1.0, b: 0.0, a: 0.0, b_grad: 0.0, zeta: 0.01, dim: 1 }
    }

    #[test]
    fn kappa0_examples() {
        assert!((compute_kappa0(0.25, 1).unwrap() - 0.346_573_590_279_972_6).abs() < 1e-12);
        assert!(compute_kappa0(1e-12, 1).unwrap() < 1e-11);
        assert!(compute_kappa0(0.5, 1).is_err());
        let q = kappa0_quadrature(&GaussianBase::new(1, 0.25).unwrap()).unwrap();
        assert!((q - compute_kappa0(0.25, 1).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn i_constants_gaussian() {
        for (s2, n) in [(0.25, 1), (0.5, 2), (1.0, 3)] {
            let (i, ip) = compute_i_constants(&GaussianBase::new(n, s2).unwrap());
            assert!((i - gaussian_i_closed_form(s2, n)).abs() < 1e-9 * i);
            assert!((ip - gaussian_i_prime_closed_form(s2, n)).abs() < 1e-9 * ip);
        }
    }

    #[test]
    fn m_theta_examples() {
        assert_eq!(compute_m_theta(0.34657, 1.0, 0.0, 0.0), 0.34657);
        assert_eq!(compute_m_theta(0.0, 0.5, 1.0, 0.0), 4.0);
    }

    #[test]
    fn c_constants_examples() {
        let alg = AlgorithmInput::new(0.1, 0.05, 2.0, 0.01, 1.0);
        let sc = StructuralConstants::gaussian(quad_input(), &alg, 0.25).unwrap();
        let c = compute_c_constants(&sc).unwrap();
        assert!((c.c0 - (3.0 * 0.346_573_590_279_972_6 + 0.01)).abs() < 1e-12);
        assert!((c.c5 - 300.0).abs() < 1e-9);
    }

    #[test]
    fn log_sobolev_finite_for_quadratic() {
        let alg = AlgorithmInput::new(0.1, 0.05, 2.0, 0.01, 1.0);
        let sc = StructuralConstants::gaussian(quad_input(), &alg, 0.25).unwrap();
        let ls = compute_log_sobolev(&sc).unwrap();
        for v in [ls.kappa, ls.gamma_lyap, ls.poincare_inv, ls.c_ls] {
            assert!(v > 0.0 && v.is_finite());
        }
    }

    #[test]
    fn log_sobolev_overflow_is_reported() {
        let alg = AlgorithmInput::new(0.1, 0.05, 500.0, 0.01, 1.0);
        let mut input = quad_input();
        input.a = 10.0;
        let sc = StructuralConstants::gaussian(input, &alg, 0.25).unwrap();
        match compute_log_sobolev(&sc) {
            Err(Error::Overflow { log_value, .. }) => assert!(log_value > 709.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn schedule_examples() {
        let k = GaussianKernel::new(1).unwrap();
        let s = schedule_from_delta(0.1, 2.0, 10.0, &k).unwrap();
        assert!((s.epsilon - 0.001_886_117_8).abs() < 1e-9);
        assert_eq!(s.k, libm::ceil(2.0 * 10.0 * libm::log(10.0) / s.epsilon) as u64);
        assert!(s.gamma <= libm::pow(s.epsilon, 1.5) && s.gamma >= s.epsilon * s.epsilon);
        assert!(s.kernel_delta_degenerate);
        assert!(schedule_from_delta(0.99, 2.0, 10.0, &k).is_err());
        assert!(schedule_from_delta(0.0, 2.0, 10.0, &k).is_err());
    }

    #[test]
    fn xi_examples() {
        assert!((xi_lower_bound(0.9, 0.01, 1.0).unwrap() - 0.7921).abs() < 1e-12);
        assert!((xi_lower_bound(0.7, 0.0, 1.0).unwrap() - 0.49).abs() < 1e-15);
        assert_eq!(xi_lower_bound(1.0, 0.0, 1.0).unwrap(), 1.0);
        assert!(xi_lower_bound(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn reconstruction_boundary_is_vacuous() {
        let kde = KdeConstants::new(&GaussianKernel::new(1).unwrap(), 2.0, 1.0, 1.0);
        let (rho, c6, xi, vol) = (0.1, 3.0, 0.8, 4.0);
        let x = reconstruction_x_min(rho, c6, xi, vol);
        let inp = ReconstructionInput {
            x,
            y: 1.0,
            t: 100.0,
            b_t: 100f64.powf(-0.25),
            rho,
            xi,
            theta_volume: vol,
            lipschitz: 2.0,
            p_theta: 0.5,
            dim: 1,
            c6,
            kde,
        };
        let r = reconstruction_bound(&inp).unwrap();
        assert_eq!(r.psi, 0.0);
        assert!(r.vacuous);
        let below = ReconstructionInput { x: 0.5 * x, ..inp };
        assert!(reconstruction_bound(&below).is_err());
    }
}
