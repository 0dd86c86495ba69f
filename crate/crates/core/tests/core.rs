use proptest::prelude::*;
use psgld_irl_core::cost::{
    bayes_cost, dissipativity_gap, erm_cost, gradient_check, DoubleWellCost, GaussianLikelihood, GaussianLogPrior,
    LogDensityTerm, QuadraticCost, SquaredLoss,
};
use psgld_irl_core::kernel::{kernel_eval_scaled, kernel_spec_check};
use psgld_irl_core::mdp::{MdpCost, Regularizer, TabularMdp};
use psgld_irl_core::{BaseDistribution, CostModel, GaussianKernel, RandomSource, ScaledDistribution, SmoothingKernel, StructuralInput};

fn unit(dim: usize) -> StructuralInput {
    StructuralInput { l_j: 1.0, l_grad_j: 1.0, m: 1.0, b: 0.0, a: 0.0, b_grad: 0.0, zeta: 1.0, dim }
}

fn trapezoid_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| f(lo + i as f64 * h) * if i == 0 || i == n - 1 { 0.5 } else { 1.0 }).sum::<f64>() * h
}

fn trapezoid_2d(f: impl Fn(f64, f64) -> f64, half: f64, n: usize) -> f64 {
    trapezoid_1d(|x| trapezoid_1d(|y| f(x, y), -half, half, n), -half, half, n)
}

#[test]
fn scaled_density_has_unit_mass() {
    for gamma in [0.1, 1.0, 10.0] {
        let half = 12.0 * 0.5 * gamma;
        let d1 = ScaledDistribution::gaussian(1, 0.25, gamma).unwrap();
        let m1 = trapezoid_1d(|x| d1.density(&[x]), -half, half, 4001);
        assert!((m1 - 1.0).abs() < 1e-6, "gamma {gamma}: {m1}");
        let d2 = ScaledDistribution::gaussian(2, 0.25, gamma).unwrap();
        let m2 = trapezoid_2d(|x, y| d2.density(&[x, y]), half, 601);
        assert!((m2 - 1.0).abs() < 1e-6, "gamma {gamma}: {m2}");
    }
}

#[test]
fn scaled_density_gradient_matches_differences() {
    let d = ScaledDistribution::gaussian(2, 0.25, 0.3).unwrap();
    let mut rng = RandomSource::new(11, 0);
    for _ in 0..20 {
        let x = [0.4 * rng.standard_normal(), 0.4 * rng.standard_normal()];
        let g = d.grad_density(&x);
        for i in 0..2 {
            let h = 1e-6;
            let (mut a, mut b) = (x, x);
            a[i] += h;
            b[i] -= h;
            let fd = (d.density(&a) - d.density(&b)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()));
        }
    }
}

#[test]
fn scaled_samples_match_moments() {
    let d = ScaledDistribution::gaussian(1, 0.25, 2.0).unwrap();
    let mut rng = RandomSource::new(3, 1);
    let n = 20_000;
    let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)[0]).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 4.0 * (1.0 / n as f64).sqrt());
    assert!((var - 1.0).abs() < 0.05);
}

#[test]
fn scaled_kernel_has_unit_mass() {
    let k1 = GaussianKernel::new(1).unwrap();
    let k2 = GaussianKernel::new(2).unwrap();
    for delta in [0.05, 0.3, 1.0, 4.0] {
        let half = 12.0 * delta;
        let m1 = trapezoid_1d(|u| kernel_eval_scaled(&k1, delta, &[u]).unwrap(), -half, half, 4001);
        let m2 = trapezoid_2d(|u, v| kernel_eval_scaled(&k2, delta, &[u, v]).unwrap(), half, 601);
        assert!((m1 - 1.0).abs() < 1e-6 && (m2 - 1.0).abs() < 1e-6, "delta {delta}: {m1} {m2}");
    }
    assert!(kernel_eval_scaled(&k1, 0.0, &[0.0]).is_err());
}

#[derive(Debug)]
struct Doubled(GaussianKernel);

impl SmoothingKernel for Doubled {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, u: &[f64]) -> f64 {
        2.0 * self.0.eval(u)
    }
    fn sup_value(&self) -> f64 {
        2.0 * self.0.sup_value()
    }
    fn radial_profile(&self, r: f64) -> f64 {
        2.0 * self.0.radial_profile(r)
    }
    fn second_moment(&self) -> f64 {
        2.0
    }
}

#[derive(Debug)]
struct Skewed(GaussianKernel);

impl SmoothingKernel for Skewed {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, u: &[f64]) -> f64 {
        self.0.eval(u) * (1.0 + 0.1 * (u[0] / (1.0 + u[0] * u[0])))
    }
    fn sup_value(&self) -> f64 {
        1.1 * self.0.sup_value()
    }
    fn radial_profile(&self, r: f64) -> f64 {
        self.0.radial_profile(r)
    }
    fn second_moment(&self) -> f64 {
        1.0
    }
}

#[test]
fn kernel_conditions() {
    for n in 1..=3 {
        assert!(kernel_spec_check(&GaussianKernel::new(n).unwrap()).unwrap().passed(), "dim {n}");
    }
    let r = kernel_spec_check(&Doubled(GaussianKernel::new(1).unwrap())).unwrap();
    assert!(!r.integral_ok && (r.integral - 2.0).abs() < 1e-6);
    let s = kernel_spec_check(&Skewed(GaussianKernel::new(1).unwrap())).unwrap();
    assert!(!s.symmetric && s.integral_ok);
}

fn chain_mdp() -> TabularMdp {
    TabularMdp::new(
        vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]],
        vec![vec![1.0, 0.0], vec![0.5, 2.0]],
        0.9,
        vec![0.5, 0.5],
    )
    .unwrap()
}

fn shipped_costs() -> Vec<(&'static str, Box<dyn CostModel>, usize)> {
    let data: Vec<Vec<f64>> = (0..9).map(|i| vec![0.2 * i as f64 - 0.8, (i as f64).sin()]).collect();
    let likes: Vec<Box<dyn LogDensityTerm>> =
        (0..5).map(|i| Box::new(GaussianLikelihood { x: vec![0.3 * i as f64, -0.1], var: 0.5 }) as Box<dyn LogDensityTerm>).collect();
    vec![
        ("quadratic", Box::new(QuadraticCost::new(3, 1.7, 0.1).unwrap()), 3),
        ("double-well", Box::new(DoubleWellCost::new(2, 1.0, 0.5, 0.1).unwrap()), 2),
        ("erm", Box::new(erm_cost(data, Box::new(SquaredLoss), 0.3, unit(2)).unwrap()), 2),
        ("bayes", Box::new(bayes_cost(Box::new(GaussianLogPrior { mean: vec![0.0, 0.0], var: 1.0 }), likes, 5.0, unit(2))), 2),
        ("mdp-l2", Box::new(MdpCost::new(chain_mdp(), 0.1, Regularizer::L2, 400).unwrap()), 2),
        ("mdp-entropy", Box::new(MdpCost::new(chain_mdp(), 0.1, Regularizer::NegEntropy, 400).unwrap()), 2),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shipped_gradients_match_differences(seed in 0u64..1_000_000) {
        let mut rng = RandomSource::new(seed, 0);
        for (name, cost, dim) in shipped_costs() {
            let x: Vec<f64> = (0..dim).map(|_| 1.4 * rng.uniform() + 0.05).collect();
            let err = gradient_check(cost.as_ref(), &x);
            prop_assert!(err <= 1e-5, "{} at {:?}: {}", name, x, err);
        }
    }

    #[test]
    fn random_source_is_reproducible(seed in any::<u64>(), stream in 0u64..64) {
        let mut a = RandomSource::new(seed, stream);
        let mut b = RandomSource::new(seed, stream);
        for _ in 0..32 {
            prop_assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
            prop_assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
        let (mut ca, mut cb) = (a.child(7), b.child(7));
        prop_assert_eq!(ca.normal_vec(4), cb.normal_vec(4));
    }
}

#[test]
fn distinct_streams_differ() {
    let mut a = RandomSource::new(1, 0);
    let mut b = RandomSource::new(1, 1);
    let xa: Vec<u64> = (0..8).map(|_| a.uniform().to_bits()).collect();
    let xb: Vec<u64> = (0..8).map(|_| b.uniform().to_bits()).collect();
    assert_ne!(xa, xb);
}

#[test]
fn bayes_prior_only() {
    let c = bayes_cost(Box::new(GaussianLogPrior { mean: vec![0.0], var: 1.0 }), Vec::new(), 0.0, unit(1));
    let c0 = c.value(&[0.0]);
    for t in [-1.3, 0.2, 2.0] {
        assert!((c.value(&[t]) - c0 - 0.5 * t * t).abs() < 1e-14);
        assert!((c.grad(&[t])[0] - t).abs() < 1e-15);
    }
}

#[test]
fn bayes_conjugate_posterior_mean_is_stationary() {
    let xs = [0.4, 1.1, -0.2, 0.9];
    let (s0, s) = (2.0, 0.5);
    let likes: Vec<Box<dyn LogDensityTerm>> =
        xs.iter().map(|&x| Box::new(GaussianLikelihood { x: vec![x], var: s }) as Box<dyn LogDensityTerm>).collect();
    let c = bayes_cost(Box::new(GaussianLogPrior { mean: vec![0.0], var: s0 }), likes, 0.0, unit(1));
    let post_mean = (xs.iter().sum::<f64>() / s) / (1.0 / s0 + xs.len() as f64 / s);
    assert!(c.grad(&[post_mean])[0].abs() < 1e-12);
}

#[test]
fn bayes_noisy_gradient_is_unbiased() {
    let likes: Vec<Box<dyn LogDensityTerm>> =
        (0..6).map(|i| Box::new(GaussianLikelihood { x: vec![i as f64 * 0.5], var: 1.0 }) as Box<dyn LogDensityTerm>).collect();
    let c = bayes_cost(Box::new(GaussianLogPrior { mean: vec![0.0], var: 1.0 }), likes, 0.0, unit(1)).with_batch_size(2).unwrap();
    let mut rng = RandomSource::new(9, 0);
    let n = 10_000;
    let draws: Vec<f64> = (0..n).map(|_| c.noisy_grad(&[0.3], &mut rng)[0]).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - c.grad(&[0.3])[0]).abs() < 3.0 * (var / n as f64).sqrt());
}

#[test]
fn erm_regularization_gives_dissipativity() {
    let m = 0.8;
    let data: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 - 2.0]).collect();
    let c = erm_cost(data, Box::new(SquaredLoss), m / 2.0, unit(1)).unwrap();
    for i in 0..=200 {
        let x = -10.0 + 0.1 * i as f64;
        assert!(dissipativity_gap(&c, &[x], m, 0.0) >= -1e-12);
    }
}

#[test]
fn erm_squared_loss_value() {
    let c = erm_cost(vec![vec![0.3]], Box::new(SquaredLoss), 0.0, unit(1)).unwrap();
    for w in [-1.0, 0.3, 2.5] {
        assert!((c.value(&[w]) - 0.5 * (w - 0.3) * (w - 0.3)).abs() < 1e-15);
    }
}
