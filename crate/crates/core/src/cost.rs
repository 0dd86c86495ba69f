//! Cost landscapes `J` observed through noisy gradients.
//!
//! Shipped models: [`QuadraticCost`], [`DoubleWellCost`], [`ErmCost`] and
//! [`BayesCost`]. The tabular MDP cost lives in [`crate::mdp`].

use crate::error::{Error, Result};
use crate::numeric::central_gradient;
use crate::param::{dot, norm, norm_sq, ParamVector};
use crate::rng::RandomSource;
use alloc::boxed::Box;
use alloc::vec::Vec;

/// Structural constants of a cost model.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralInput {
    /// Lipschitz constant of `J`.
    pub l_j: f64,
    /// Lipschitz constant of `grad J`.
    pub l_grad_j: f64,
    /// Dissipativity slope.
    pub m: f64,
    /// Dissipativity offset.
    pub b: f64,
    /// `|J(0)|`.
    pub a: f64,
    /// `|grad J(0)|`.
    pub b_grad: f64,
    /// Bound on the gradient-noise variance.
    pub zeta: f64,
    /// Dimension.
    pub dim: usize,
}

impl StructuralInput {
    /// Checks positivity and nonnegativity constraints.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("L_J", self.l_j), ("L_gradJ", self.l_grad_j), ("m", self.m)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive and finite"));
            }
        }
        for (name, v) in [("b", self.b), ("A", self.a), ("B", self.b_grad), ("zeta", self.zeta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be nonnegative and finite"));
            }
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(())
    }
}

/// A nonnegative cost with exact and noisy gradients.
pub trait CostModel: Send + Sync {
    /// Dimension `N`.
    fn dim(&self) -> usize;
    /// `J(x)`.
    fn value(&self, x: &[f64]) -> f64;
    /// `grad J(x)`.
    fn grad(&self, x: &[f64]) -> ParamVector;
    /// Unbiased noisy gradient.
    fn noisy_grad(&self, x: &[f64], rng: &mut RandomSource) -> ParamVector;
    /// Structural constants.
    fn constants(&self) -> StructuralInput;
}

/// Relative error between `grad` and central differences of `value` at `x`.
///
/// The step is `1e-5 * (1 + |x|)`.
pub fn gradient_check(cost: &dyn CostModel, x: &[f64]) -> f64 {
    let h = 1e-5 * (1.0 + norm(x));
    let fd = central_gradient(|y| cost.value(y), x, h);
    let g = cost.grad(x);
    let diff: f64 = fd.iter().zip(g.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    libm::sqrt(diff) / norm(&g).max(norm(&fd)).max(1e-12)
}

/// `<x, grad J(x)> - m |x|^2 + b`; nonnegative where dissipativity holds.
pub fn dissipativity_gap(cost: &dyn CostModel, x: &[f64], m: f64, b: f64) -> f64 {
    dot(x, &cost.grad(x)) - m * norm_sq(x) + b
}

fn add_noise(mut g: ParamVector, std: f64, rng: &mut RandomSource) -> ParamVector {
    if std > 0.0 {
        for v in g.iter_mut() {
            *v += std * rng.standard_normal();
        }
    }
    g
}

/// `J(x) = (c/2) |x|^2` with additive Gaussian gradient noise.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCost {
    dim: usize,
    curvature: f64,
    noise_std: f64,
    box_radius: f64,
}

impl QuadraticCost {
    /// Builds the model; Lipschitz constants are taken on the box `[-2, 2]^N`.
    pub fn new(dim: usize, curvature: f64, noise_std: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(Error::invalid("curvature", "must be positive"));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::invalid("noise_std", "must be nonnegative"));
        }
        Ok(QuadraticCost { dim, curvature, noise_std, box_radius: 2.0 })
    }

    /// Sets the per-axis half-width of the box on which `L_J` is measured.
    pub fn with_box_half_width(mut self, r: f64) -> Self {
        self.box_radius = r;
        self
    }
}

impl CostModel for QuadraticCost {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.curvature * norm_sq(x)
    }
    fn grad(&self, x: &[f64]) -> ParamVector {
        ParamVector::new(x.iter().map(|v| self.curvature * v).collect())
    }
    fn noisy_grad(&self, x: &[f64], rng: &mut RandomSource) -> ParamVector {
        add_noise(self.grad(x), self.noise_std, rng)
    }
    fn constants(&self) -> StructuralInput {
        let n = self.dim as f64;
        StructuralInput {
            l_j: self.curvature * self.box_radius * libm::sqrt(n),
            l_grad_j: self.curvature,
            m: self.curvature,
            b: 0.0,
            a: 0.0,
            b_grad: 0.0,
            zeta: n * self.noise_std * self.noise_std,
            dim: self.dim,
        }
    }
}

/// Separable double well `J(x) = sum_i x_i^2/2 + h exp(-x_i^2 / (2 w^2))`.
///
/// Two wells per axis when `h > w^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleWellCost {
    dim: usize,
    height: f64,
    width: f64,
    noise_std: f64,
    box_radius: f64,
}

impl DoubleWellCost {
    /// Builds the model.
    pub fn new(dim: usize, height: f64, width: f64, noise_std: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !(height >= 0.0 && height.is_finite()) {
            return Err(Error::invalid("height", "must be nonnegative"));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::invalid("width", "must be positive"));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::invalid("noise_std", "must be nonnegative"));
        }
        Ok(DoubleWellCost { dim, height, width, noise_std, box_radius: 2.0 })
    }

    /// Location of the positive well on each axis, `0` when there is a single well.
    pub fn well_location(&self) -> f64 {
        let r = self.height / (self.width * self.width);
        if r > 1.0 {
            self.width * libm::sqrt(2.0 * libm::log(r))
        } else {
            0.0
        }
    }
}

impl CostModel for DoubleWellCost {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        let w2 = self.width * self.width;
        x.iter().map(|v| 0.5 * v * v + self.height * libm::exp(-0.5 * v * v / w2)).sum()
    }
    fn grad(&self, x: &[f64]) -> ParamVector {
        let w2 = self.width * self.width;
        ParamVector::new(
            x.iter().map(|v| v - self.height / w2 * v * libm::exp(-0.5 * v * v / w2)).collect(),
        )
    }
    fn noisy_grad(&self, x: &[f64], rng: &mut RandomSource) -> ParamVector {
        add_noise(self.grad(x), self.noise_std, rng)
    }
    fn constants(&self) -> StructuralInput {
        let n = self.dim as f64;
        let r = self.height / (self.width * self.width);
        let e = core::f64::consts::E;
        StructuralInput {
            l_j: libm::sqrt(n) * (self.box_radius + self.height / self.width * libm::exp(-0.5)),
            l_grad_j: (r - 1.0).abs().max(1.0 + 2.0 * r * libm::exp(-1.5)),
            m: 1.0,
            b: 2.0 * n * self.height / e,
            a: n * self.height,
            b_grad: 0.0,
            zeta: n * self.noise_std * self.noise_std,
            dim: self.dim,
        }
    }
}

/// A per-sample loss `f(w, z)` with its gradient in `w`.
pub trait SampleLoss: Send + Sync {
    /// `f(w, z)`.
    fn value(&self, w: &[f64], z: &[f64]) -> f64;
    /// `grad_w f(w, z)`.
    fn grad(&self, w: &[f64], z: &[f64]) -> ParamVector;
}

/// `f(w, z) = |w - z|^2 / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SquaredLoss;

impl SampleLoss for SquaredLoss {
    fn value(&self, w: &[f64], z: &[f64]) -> f64 {
        0.5 * w.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }
    fn grad(&self, w: &[f64], z: &[f64]) -> ParamVector {
        ParamVector::new(w.iter().zip(z).map(|(a, b)| a - b).collect())
    }
}

/// Empirical risk `(1/n) sum_i f(w, z_i) + reg |w|^2`.
pub struct ErmCost {
    samples: Vec<Vec<f64>>,
    loss: Box<dyn SampleLoss>,
    reg: f64,
    batch: usize,
    constants: StructuralInput,
}

/// Builds an [`ErmCost`] with minibatch size one.
pub fn erm_cost(
    samples: Vec<Vec<f64>>,
    loss: Box<dyn SampleLoss>,
    reg: f64,
    constants: StructuralInput,
) -> Result<ErmCost> {
    if samples.is_empty() {
        return Err(Error::Empty("ERM dataset"));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::invalid("reg", "must be nonnegative"));
    }
    Ok(ErmCost { samples, loss, reg, batch: 1, constants })
}

impl ErmCost {
    /// Sets the minibatch size used by the noisy gradient.
    pub fn with_batch_size(mut self, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::invalid("batch", "must be at least 1"));
        }
        self.batch = batch;
        Ok(self)
    }

    /// Number of data rows.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; construction rejects empty data.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

impl CostModel for ErmCost {
    fn dim(&self) -> usize {
        self.constants.dim
    }
    fn value(&self, w: &[f64]) -> f64 {
        let n = self.samples.len() as f64;
        self.samples.iter().map(|z| self.loss.value(w, z)).sum::<f64>() / n + self.reg * norm_sq(w)
    }
    fn grad(&self, w: &[f64]) -> ParamVector {
        let n = self.samples.len() as f64;
        let mut g = ParamVector::zeros(w.len());
        for z in &self.samples {
            g.axpy(1.0 / n, &self.loss.grad(w, z));
        }
        g.axpy(2.0 * self.reg, w);
        g
    }
    fn noisy_grad(&self, w: &[f64], rng: &mut RandomSource) -> ParamVector {
        let mut g = ParamVector::zeros(w.len());
        for _ in 0..self.batch {
            let z = &self.samples[rng.index(self.samples.len())];
            g.axpy(1.0 / self.batch as f64, &self.loss.grad(w, z));
        }
        g.axpy(2.0 * self.reg, w);
        g
    }
    fn constants(&self) -> StructuralInput {
        self.constants.clone()
    }
}

/// A differentiable log-density term in `theta`.
pub trait LogDensityTerm: Send + Sync {
    /// Log density.
    fn value(&self, theta: &[f64]) -> f64;
    /// Gradient of the log density.
    fn grad(&self, theta: &[f64]) -> ParamVector;
}

/// `log N(theta; mean, var I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLogPrior {
    /// Prior mean.
    pub mean: Vec<f64>,
    /// Prior variance per coordinate.
    pub var: f64,
}

impl LogDensityTerm for GaussianLogPrior {
    fn value(&self, theta: &[f64]) -> f64 {
        let n = theta.len() as f64;
        let d: f64 = theta.iter().zip(&self.mean).map(|(t, m)| (t - m) * (t - m)).sum();
        -0.5 * d / self.var - 0.5 * n * libm::log(2.0 * core::f64::consts::PI * self.var)
    }
    fn grad(&self, theta: &[f64]) -> ParamVector {
        ParamVector::new(theta.iter().zip(&self.mean).map(|(t, m)| -(t - m) / self.var).collect())
    }
}

/// `log N(x; theta, var I)` for one observation `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLikelihood {
    /// Observation.
    pub x: Vec<f64>,
    /// Observation variance per coordinate.
    pub var: f64,
}

impl LogDensityTerm for GaussianLikelihood {
    fn value(&self, theta: &[f64]) -> f64 {
        GaussianLogPrior { mean: self.x.clone(), var: self.var }.value(theta)
    }
    fn grad(&self, theta: &[f64]) -> ParamVector {
        GaussianLogPrior { mean: self.x.clone(), var: self.var }.grad(theta)
    }
}

/// Negative log posterior `-log p(theta) - sum_i log p(x_i | theta) + shift`.
pub struct BayesCost {
    prior: Box<dyn LogDensityTerm>,
    likelihoods: Vec<Box<dyn LogDensityTerm>>,
    shift: f64,
    batch: usize,
    constants: StructuralInput,
}

/// Builds a [`BayesCost`]; `shift` makes the value nonnegative on the experiment box.
pub fn bayes_cost(
    prior: Box<dyn LogDensityTerm>,
    likelihoods: Vec<Box<dyn LogDensityTerm>>,
    shift: f64,
    constants: StructuralInput,
) -> BayesCost {
    BayesCost { prior, likelihoods, shift, batch: 1, constants }
}

impl BayesCost {
    /// Sets the minibatch size of the noisy gradient.
    pub fn with_batch_size(mut self, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::invalid("batch", "must be at least 1"));
        }
        self.batch = batch;
        Ok(self)
    }
}

impl CostModel for BayesCost {
    fn dim(&self) -> usize {
        self.constants.dim
    }
    fn value(&self, theta: &[f64]) -> f64 {
        -self.prior.value(theta) - self.likelihoods.iter().map(|l| l.value(theta)).sum::<f64>() + self.shift
    }
    fn grad(&self, theta: &[f64]) -> ParamVector {
        let mut g = self.prior.grad(theta).scale(-1.0);
        for l in &self.likelihoods {
            g.axpy(-1.0, &l.grad(theta));
        }
        g
    }
    fn noisy_grad(&self, theta: &[f64], rng: &mut RandomSource) -> ParamVector {
        let mut g = self.prior.grad(theta).scale(-1.0);
        let n = self.likelihoods.len();
        if n > 0 {
            let w = n as f64 / self.batch as f64;
            for _ in 0..self.batch {
                g.axpy(-w, &self.likelihoods[rng.index(n)].grad(theta));
            }
        }
        g
    }
    fn constants(&self) -> StructuralInput {
        self.constants.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn unit_constants(dim: usize) -> StructuralInput {
        StructuralInput { l_j: 1.0, l_grad_j: 1.0, m: 1.0, b: 0.0, a: 0.0, b_grad: 0.0, zeta: 1.0, dim }
    }

    fn random_points(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = RandomSource::new(seed, 0);
        (0..n).map(|_| (0..dim).map(|_| 4.0 * rng.uniform() - 2.0).collect()).collect()
    }

    #[test]
    fn quadratic_gradients_match_finite_differences() {
        let c = QuadraticCost::new(3, 1.7, 0.1).unwrap();
        for x in random_points(3, 20, 1) {
            assert!(gradient_check(&c, &x) < 1e-5);
        }
    }

    #[test]
    fn double_well_gradients_match_finite_differences() {
        let c = DoubleWellCost::new(2, 1.0, 0.5, 0.1).unwrap();
        for x in random_points(2, 20, 2) {
            assert!(gradient_check(&c, &x) < 1e-5);
        }
    }

    #[test]
    fn double_well_has_wells_where_gradient_vanishes() {
        let c = DoubleWellCost::new(1, 1.0, 0.5, 0.0).unwrap();
        let x = c.well_location();
        assert!(x > 0.0);
        assert!(c.grad(&[x])[0].abs() < 1e-12);
        assert!(c.value(&[x]) < c.value(&[0.0]));
    }

    #[test]
    fn double_well_declared_constants_hold_on_grid() {
        let c = DoubleWellCost::new(1, 1.0, 0.5, 0.0).unwrap();
        let sc = c.constants();
        let xs = crate::numeric::linspace(-6.0, 6.0, 2001);
        for w in xs.windows(2) {
            let slope = (c.grad(&[w[1]])[0] - c.grad(&[w[0]])[0]) / (w[1] - w[0]);
            assert!(slope.abs() <= sc.l_grad_j + 1e-9);
            assert!(dissipativity_gap(&c, &[w[0]], sc.m, sc.b) >= -1e-12);
        }
    }

    #[test]
    fn quadratic_noise_is_unbiased() {
        let c = QuadraticCost::new(1, 1.0, 0.5).unwrap();
        let mut rng = RandomSource::new(3, 0);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| c.noisy_grad(&[0.7], &mut rng)[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.7).abs() < 3.0 * 0.5 / libm::sqrt(n as f64));
    }

    #[test]
    fn erm_single_sample_is_the_loss() {
        let c = erm_cost(vec![vec![0.3]], Box::new(SquaredLoss), 0.0, unit_constants(1)).unwrap();
        assert!((c.value(&[1.0]) - 0.5 * 0.49).abs() < 1e-15);
    }

    #[test]
    fn erm_rejects_empty_data() {
        assert_eq!(
            erm_cost(Vec::new(), Box::new(SquaredLoss), 0.0, unit_constants(1)).err(),
            Some(Error::Empty("ERM dataset"))
        );
    }

    #[test]
    fn erm_minibatch_gradient_is_unbiased() {
        let data: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.3 - 1.0, 0.1 * i as f64]).collect();
        let c = erm_cost(data, Box::new(SquaredLoss), 0.2, unit_constants(2)).unwrap().with_batch_size(2).unwrap();
        let w = [0.4, -0.3];
        let g = c.grad(&w);
        let mut rng = RandomSource::new(5, 0);
        let n = 10_000;
        let draws: Vec<ParamVector> = (0..n).map(|_| c.noisy_grad(&w, &mut rng)).collect();
        for d in 0..2 {
            let mean = draws.iter().map(|v| v[d]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|v| (v[d] - mean) * (v[d] - mean)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - g[d]).abs() < 3.0 * libm::sqrt(var / n as f64), "coord {d}");
        }
    }

    #[test]
    fn erm_regularizer_gives_dissipativity_on_centered_data() {
        let m = 0.6;
        let data = vec![vec![-1.0], vec![0.5], vec![0.5]];
        let c = erm_cost(data, Box::new(SquaredLoss), m / 2.0, unit_constants(1)).unwrap();
        for x in crate::numeric::linspace(-5.0, 5.0, 101) {
            assert!(dissipativity_gap(&c, &[x], m, 0.0) >= -1e-12);
        }
    }

    #[test]
    fn erm_gradients_match_finite_differences() {
        let data: Vec<Vec<f64>> = random_points(2, 5, 8);
        let c = erm_cost(data, Box::new(SquaredLoss), 0.1, unit_constants(2)).unwrap();
        for x in random_points(2, 20, 9) {
            assert!(gradient_check(&c, &x) < 1e-5);
        }
    }

    #[test]
    fn bayes_standard_prior_without_data_is_quadratic() {
        let prior = GaussianLogPrior { mean: vec![0.0], var: 1.0 };
        let c = bayes_cost(Box::new(prior), Vec::new(), 0.0, unit_constants(1));
        let k = c.value(&[0.0]);
        for x in [-1.5, 0.3, 2.0] {
            assert!((c.value(&[x]) - k - 0.5 * x * x).abs() < 1e-13);
            assert!((c.grad(&[x])[0] - x).abs() < 1e-15);
        }
    }

    #[test]
    fn bayes_conjugate_gradient_vanishes_at_posterior_mean() {
        let (tau2, s2) = (2.0, 0.5);
        let xs = [0.3, 1.1, -0.4, 0.9];
        let post_mean = xs.iter().sum::<f64>() / s2 / (1.0 / tau2 + xs.len() as f64 / s2);
        let lik: Vec<Box<dyn LogDensityTerm>> =
            xs.iter().map(|&x| Box::new(GaussianLikelihood { x: vec![x], var: s2 }) as Box<dyn LogDensityTerm>).collect();
        let c = bayes_cost(Box::new(GaussianLogPrior { mean: vec![0.0], var: tau2 }), lik, 0.0, unit_constants(1));
        assert!(c.grad(&[post_mean])[0].abs() < 1e-12);
    }

    #[test]
    fn bayes_gradients_match_finite_differences() {
        let lik: Vec<Box<dyn LogDensityTerm>> = random_points(2, 4, 10)
            .into_iter()
            .map(|x| Box::new(GaussianLikelihood { x, var: 0.7 }) as Box<dyn LogDensityTerm>)
            .collect();
        let c = bayes_cost(Box::new(GaussianLogPrior { mean: vec![0.1, -0.2], var: 1.5 }), lik, 10.0, unit_constants(2));
        for x in random_points(2, 20, 11) {
            assert!(gradient_check(&c, &x) < 1e-6);
        }
    }

    #[test]
    fn invalid_structural_input_rejected() {
        let mut sc = unit_constants(1);
        sc.m = 0.0;
        assert!(sc.validate().is_err());
        let mut sc = unit_constants(1);
        sc.zeta = -1.0;
        assert!(sc.validate().is_err());
    }
}
