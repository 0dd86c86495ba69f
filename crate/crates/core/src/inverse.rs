//! The passive Langevin sampler.
//!
//! One step reads a forward event `(theta_k, g_k)` and moves `alpha` by
//!
//! ```text
//! alpha <- alpha - eps [K_Delta(theta_k - alpha) (beta/2) g_k - grad pi(alpha)] pi(alpha)
//!                + sqrt(eps) pi(alpha) w
//! ```
//!
//! where `pi` is the scaled sampling density and `w` is standard normal.

use crate::cost::StructuralInput;
use crate::dist::{BaseDistribution, ScaledDistribution};
use crate::error::{check_dim, Error, Result};
use crate::forward::{GradientEvent, DIVERGENCE_NORM};
use crate::kernel::SmoothingKernel;
use crate::param::ParamVector;
use crate::rng::RandomSource;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Sampler parameters.
#[derive(Clone, Debug)]
pub struct PsgldConfig {
    /// Step size `eps`.
    pub epsilon: f64,
    /// Inverse temperature `beta`.
    pub beta: f64,
    /// Kernel scale `Delta`.
    pub delta: f64,
    /// Sampling distribution; also multiplies drift and noise.
    pub dist: ScaledDistribution,
    /// Weighting kernel `K`.
    pub kernel: Arc<dyn SmoothingKernel>,
}

impl PsgldConfig {
    /// Checks signs and dimensions.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("beta", self.beta), ("delta", self.delta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive and finite"));
            }
        }
        check_dim(self.dist.dim(), self.kernel.dim())
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.dist.dim()
    }
}

/// Feasibility of step sizes and temperature against the structural constants.
#[derive(Clone, Debug, PartialEq)]
pub struct A8Report {
    /// Upper end of the forward step-size interval.
    pub eta_upper: f64,
    /// Forward step size inside its interval, when supplied.
    pub eta_ok: Option<bool>,
    /// Upper end of the sampler step-size interval.
    pub epsilon_upper: f64,
    /// Sampler step size inside its interval.
    pub epsilon_ok: bool,
    /// Lower bound on the inverse temperature.
    pub beta_lower: f64,
    /// Inverse temperature above its bound.
    pub beta_ok: bool,
}

impl A8Report {
    /// Human-readable descriptions of every violated inequality.
    pub fn violations(&self) -> Vec<alloc::string::String> {
        let mut v = Vec::new();
        if self.eta_ok == Some(false) {
            v.push(format!("η ∈ (0, 1 ∧ m/(4L_∇J²)) = (0, {:e})", self.eta_upper));
        }
        if !self.epsilon_ok {
            v.push(format!("ε ∈ (0, 1 ∧ √(1/249)/L_∇J) = (0, {:e})", self.epsilon_upper));
        }
        if !self.beta_ok {
            v.push(format!("β ≥ 1/(4L_∇J²) ∨ √(2π+4)/(m√L_∇J) = {:e}", self.beta_lower));
        }
        v
    }

    /// No inequality is violated.
    pub fn feasible(&self) -> bool {
        self.eta_ok != Some(false) && self.epsilon_ok && self.beta_ok
    }
}

/// Evaluates the step-size and temperature feasibility conditions.
pub fn check_a8(eta: Option<f64>, epsilon: f64, beta: f64, sc: &StructuralInput) -> A8Report {
    let l = sc.l_grad_j;
    let eta_upper = crate::forward::eta_upper_bound(sc.m, l);
    let epsilon_upper = (libm::sqrt(1.0 / 249.0) / l).min(1.0);
    let beta_lower = (1.0 / (4.0 * l * l)).max(libm::sqrt(2.0 * PI + 4.0) / (sc.m * libm::sqrt(l)));
    A8Report {
        eta_upper,
        eta_ok: eta.map(|e| e > 0.0 && e < eta_upper),
        epsilon_upper,
        epsilon_ok: epsilon > 0.0 && epsilon < epsilon_upper,
        beta_lower,
        beta_ok: beta >= beta_lower,
    }
}

/// Sampler state.
#[derive(Clone, Debug, PartialEq)]
pub struct PsgldState {
    /// Current iterate.
    pub alpha: ParamVector,
    /// Steps taken.
    pub k: u64,
}

/// Draws `alpha_0` from the sampling distribution.
pub fn psgld_init(cfg: &PsgldConfig, rng: &mut RandomSource) -> PsgldState {
    PsgldState { alpha: cfg.dist.sample(rng), k: 0 }
}

/// Deterministic part of one step, `alpha_{k+1} - alpha_k` with `w = 0`,
/// and the noise multiplier `sqrt(eps) pi(alpha)`.
pub fn psgld_drift(alpha: &[f64], event: &GradientEvent, cfg: &PsgldConfig) -> Result<(ParamVector, f64)> {
    check_dim(alpha.len(), event.theta.len())?;
    let (p, grad_p) = cfg.dist.density_and_grad(alpha);
    let diff: Vec<f64> = event.theta.iter().zip(alpha).map(|(t, a)| t - a).collect();
    let weight = cfg.kernel.eval_scaled(&diff, cfg.delta);
    let mut bracket = grad_p.scale(-1.0);
    if weight != 0.0 {
        bracket.axpy(weight * 0.5 * cfg.beta, &event.noisy_grad);
    }
    let drift = bracket.scale(-cfg.epsilon * p);
    Ok((drift, libm::sqrt(cfg.epsilon) * p))
}

/// One step with an explicit noise vector `w`.
pub fn psgld_step_with_noise(
    state: &PsgldState,
    event: &GradientEvent,
    cfg: &PsgldConfig,
    w: &[f64],
) -> Result<PsgldState> {
    if event.terminal {
        return Err(Error::precondition("sampler step fed a terminal event"));
    }
    let (drift, scale) = psgld_drift(&state.alpha, event, cfg)?;
    let mut alpha = state.alpha.clone();
    alpha.axpy(1.0, &drift);
    alpha.axpy(scale, w);
    let n = alpha.norm();
    if !(n <= DIVERGENCE_NORM) {
        return Err(Error::Diverged { step: state.k + 1, norm: n });
    }
    Ok(PsgldState { alpha, k: state.k + 1 })
}

/// One step drawing `w` from `rng`.
pub fn psgld_step(
    state: &PsgldState,
    event: &GradientEvent,
    cfg: &PsgldConfig,
    rng: &mut RandomSource,
) -> Result<PsgldState> {
    let w = rng.normal_vec(state.alpha.dim());
    psgld_step_with_noise(state, event, cfg, &w)
}

/// Runs `k_hat` steps from a fresh draw, consuming one event per step.
pub fn run_psgld<I>(forward: &mut I, cfg: &PsgldConfig, k_hat: u64, rng: &mut RandomSource) -> Result<PsgldState>
where
    I: Iterator<Item = Result<GradientEvent>>,
{
    run_psgld_traced(forward, cfg, k_hat, rng, |_| ())
}

/// As [`run_psgld`], calling `trace` on the initial state and after every step.
pub fn run_psgld_traced<I, F>(
    forward: &mut I,
    cfg: &PsgldConfig,
    k_hat: u64,
    rng: &mut RandomSource,
    mut trace: F,
) -> Result<PsgldState>
where
    I: Iterator<Item = Result<GradientEvent>>,
    F: FnMut(&PsgldState),
{
    cfg.validate()?;
    let mut state = psgld_init(cfg, rng);
    trace(&state);
    for consumed in 0..k_hat {
        let ev = match forward.next() {
            Some(ev) => ev?,
            None => return Err(Error::ForwardExhausted { consumed, completed: 0 }),
        };
        if ev.terminal {
            return Err(Error::ForwardExhausted { consumed, completed: 0 });
        }
        state = psgld_step(&state, &ev, cfg, rng)?;
        trace(&state);
    }
    Ok(state)
}
