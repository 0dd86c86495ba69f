//! Base distributions `pi_0` and their scaled versions `pi_{0,gamma}`.
//!
//! The scaled density is `pi_{0,gamma}(x) = pi_0(x / gamma) / gamma^N`.

use crate::error::{check_dim, finite, Error, Result};
use crate::param::{norm_sq, ParamVector};
use crate::rng::RandomSource;
use alloc::sync::Arc;
use core::f64::consts::PI;
use core::fmt::Debug;

/// A probability density on `R^N` with a gradient and a sampler.
pub trait BaseDistribution: Send + Sync + Debug {
    /// Dimension `N`.
    fn dim(&self) -> usize;
    /// Density at `x`.
    fn density(&self, x: &[f64]) -> f64;
    /// Gradient of the density at `x`.
    fn grad_density(&self, x: &[f64]) -> ParamVector;
    /// One draw.
    fn sample(&self, rng: &mut RandomSource) -> ParamVector;
    /// `sup_x density(x)`.
    fn sup_density(&self) -> f64;
    /// Length scale used to bound numerical searches.
    fn scale_hint(&self) -> f64;
}

/// Isotropic Gaussian `N(0, variance * I_N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBase {
    dim: usize,
    variance: f64,
    log_norm: f64,
}

impl GaussianBase {
    /// Default variance used by the experiments.
    pub const DEFAULT_VARIANCE: f64 = 0.25;

    /// Builds `N(0, variance * I_dim)`.
    pub fn new(dim: usize, variance: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid("variance", "must be positive and finite"));
        }
        let log_norm = -0.5 * dim as f64 * libm::log(2.0 * PI * variance);
        Ok(GaussianBase { dim, variance, log_norm })
    }

    /// Variance `sigma^2`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Log density.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * norm_sq(x) / self.variance
    }
}

impl BaseDistribution for GaussianBase {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density(&self, x: &[f64]) -> f64 {
        libm::exp(self.log_density(x))
    }

    fn grad_density(&self, x: &[f64]) -> ParamVector {
        let p = self.density(x);
        ParamVector::new(x.iter().map(|xi| -xi / self.variance * p).collect())
    }

    fn sample(&self, rng: &mut RandomSource) -> ParamVector {
        rng.normal_vec(self.dim).scale(libm::sqrt(self.variance))
    }

    fn sup_density(&self) -> f64 {
        libm::exp(self.log_norm)
    }

    fn scale_hint(&self) -> f64 {
        libm::sqrt(self.variance)
    }
}

/// `pi_{0,gamma}`: the base density contracted by `gamma` and renormalized.
#[derive(Clone, Debug)]
pub struct ScaledDistribution {
    base: Arc<dyn BaseDistribution>,
    gamma: f64,
    normalizer: f64,
}

impl ScaledDistribution {
    /// Builds `pi_{0,gamma}`; `gamma` must be positive.
    pub fn new(base: Arc<dyn BaseDistribution>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", "must be positive and finite"));
        }
        let normalizer = libm::pow(gamma, base.dim() as f64);
        if !(normalizer > 0.0 && normalizer.is_finite()) {
            return Err(Error::invalid("gamma", "gamma^N under- or overflows"));
        }
        Ok(ScaledDistribution { base, gamma, normalizer })
    }

    /// Gaussian base `N(0, variance I)` scaled by `gamma`.
    pub fn gaussian(dim: usize, variance: f64, gamma: f64) -> Result<Self> {
        ScaledDistribution::new(Arc::new(GaussianBase::new(dim, variance)?), gamma)
    }

    /// Scale parameter.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `int pi_0(y / gamma) dy = gamma^N`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Underlying base distribution.
    pub fn base(&self) -> &Arc<dyn BaseDistribution> {
        &self.base
    }

    fn contract(&self, x: &[f64]) -> ParamVector {
        ParamVector::new(x.iter().map(|v| v / self.gamma).collect())
    }

    /// Checked density evaluation.
    pub fn try_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        finite(self.density(x), "scaled density")
    }

    /// Density and gradient at `x` in one pass.
    pub fn density_and_grad(&self, x: &[f64]) -> (f64, ParamVector) {
        let y = self.contract(x);
        let p = self.base.density(&y) / self.normalizer;
        let g = self.base.grad_density(&y).scale(1.0 / (self.gamma * self.normalizer));
        (p, g)
    }
}

impl BaseDistribution for ScaledDistribution {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.base.density(&self.contract(x)) / self.normalizer
    }

    fn grad_density(&self, x: &[f64]) -> ParamVector {
        self.density_and_grad(x).1
    }

    fn sample(&self, rng: &mut RandomSource) -> ParamVector {
        self.base.sample(rng).scale(self.gamma)
    }

    fn sup_density(&self) -> f64 {
        self.base.sup_density() / self.normalizer
    }

    fn scale_hint(&self) -> f64 {
        self.base.scale_hint() * self.gamma
    }
}
