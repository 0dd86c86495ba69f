use proptest::prelude::*;
use psgld_irl_core::cost::QuadraticCost;
use psgld_irl_core::forward::{run_reinit_sgd, SgdConfig};
use psgld_irl_core::inverse::{run_psgld, PsgldConfig};
use psgld_irl_core::metrics::{lag1_autocorrelation, GridFunction};
use psgld_irl_core::reconstruct::{
    align_grids, alignment_normalize, bandwidth_schedule, construct_domains, cost_from_density, effective_bandwidth,
    kde_estimate, run_independent_sampling, run_sequential_sampling, AlignMode, GridSpec, ReconstructConfig, SampleSet,
};
use psgld_irl_core::{BoxDomain, Error, GaussianKernel, ParamVector, RandomSource, ScaledDistribution, SmoothingKernel};
use std::sync::Arc;

fn kernel(dim: usize) -> Arc<dyn SmoothingKernel> {
    Arc::new(GaussianKernel::new(dim).unwrap())
}

fn psgld(epsilon: f64) -> PsgldConfig {
    PsgldConfig { epsilon, beta: 2.0, delta: 0.3, dist: ScaledDistribution::gaussian(1, 0.25, 0.3).unwrap(), kernel: kernel(1) }
}

fn sgd() -> SgdConfig {
    SgdConfig { eta: 0.1, c_opt: 0.05, max_iters: u64::MAX, dist: ScaledDistribution::gaussian(1, 0.25, 1.0).unwrap() }
}

fn recon(t: usize, k_hat: u64, b: BoxDomain) -> ReconstructConfig {
    ReconstructConfig { rho: 0.0, t_streams: t, theta_box: b, kde_kernel: kernel(1), b_t: bandwidth_schedule(t).unwrap(), k_hat, psgld: psgld(0.01) }
}

fn set(points: &[f64], t: usize, lo: f64, hi: f64) -> SampleSet {
    SampleSet {
        samples: points.iter().map(|&x| ParamVector::new(vec![x])).collect(),
        t_attempted: t,
        domain: BoxDomain::cube(1, lo, hi).unwrap(),
    }
}

#[test]
fn single_stream_reduces_to_sampler_run() {
    let cost = QuadraticCost::new(1, 1.0, 0.2).unwrap();
    let cfg = recon(1, 300, BoxDomain::cube(1, -1e5, 1e5).unwrap());
    let out = run_sequential_sampling(
        run_reinit_sgd(&cost, sgd(), RandomSource::new(1, 0)).unwrap(),
        &cfg,
        |i| RandomSource::new(2, i as u64),
    )
    .unwrap();
    assert_eq!(out.samples.samples.len(), 1);
    let mut fwd = run_reinit_sgd(&cost, sgd(), RandomSource::new(1, 0)).unwrap();
    let direct = run_psgld(&mut fwd, &cfg.psgld, 300, &mut RandomSource::new(2, 0)).unwrap();
    assert_eq!(out.samples.samples[0], direct.alpha);
    assert_eq!(out.consumed_events, 300);
}

#[test]
fn degenerate_box_collects_nothing() {
    let cost = QuadraticCost::new(1, 1.0, 0.2).unwrap();
    let cfg = recon(5, 50, BoxDomain::cube(1, 0.3, 0.3).unwrap());
    let out = run_sequential_sampling(run_reinit_sgd(&cost, sgd(), RandomSource::new(1, 0)).unwrap(), &cfg, |i| {
        RandomSource::new(3, i as u64)
    })
    .unwrap();
    assert!(out.samples.samples.is_empty());
    assert!(matches!(kde_estimate(&out.samples, 1.0, 5, kernel(1)), Err(Error::Empty(_))));
}

#[test]
fn sequential_samples_are_uncorrelated() {
    let cost = QuadraticCost::new(1, 1.0, 0.2).unwrap();
    let t = 400;
    let cfg = recon(t, 200, BoxDomain::cube(1, -1e3, 1e3).unwrap());
    let out = run_sequential_sampling(run_reinit_sgd(&cost, sgd(), RandomSource::new(4, 0)).unwrap(), &cfg, |i| {
        RandomSource::new(5, i as u64)
    })
    .unwrap();
    assert!(out.discarded_events > 0);
    let xs: Vec<f64> = out.samples.samples.iter().map(|p| p[0]).collect();
    let r = lag1_autocorrelation(&xs).unwrap();
    assert!(r.abs() < 3.0 / (t as f64).sqrt(), "lag-1 autocorrelation {r}");
}

#[test]
fn sampling_is_deterministic_and_order_free() {
    let cost = QuadraticCost::new(1, 1.0, 0.2).unwrap();
    let cfg = recon(20, 100, BoxDomain::cube(1, -2.0, 2.0).unwrap());
    let run = || {
        run_independent_sampling(|i| run_reinit_sgd(&cost, sgd(), RandomSource::new(6, i as u64)), &cfg, |i| {
            RandomSource::new(7, i as u64)
        })
        .unwrap()
    };
    assert_eq!(run(), run());
    let seq = run_sequential_sampling(run_reinit_sgd(&cost, sgd(), RandomSource::new(6, 0)).unwrap(), &cfg, |i| {
        RandomSource::new(7, i as u64)
    })
    .unwrap();
    let again = run_sequential_sampling(run_reinit_sgd(&cost, sgd(), RandomSource::new(6, 0)).unwrap(), &cfg, |i| {
        RandomSource::new(7, i as u64)
    })
    .unwrap();
    assert_eq!(seq, again);
}

#[test]
fn exhaustion_counts_completed_streams() {
    let cost = QuadraticCost::new(1, 1.0, 0.2).unwrap();
    let mut short = sgd();
    short.max_iters = 150;
    let cfg = recon(10, 100, BoxDomain::cube(1, -2.0, 2.0).unwrap());
    let err = run_sequential_sampling(run_reinit_sgd(&cost, short, RandomSource::new(8, 0)).unwrap(), &cfg, |i| {
        RandomSource::new(9, i as u64)
    })
    .unwrap_err();
    assert!(matches!(err, Error::ForwardExhausted { completed: 1, .. }), "{err:?}");
}

#[test]
fn single_sample_density_is_kernel_peak() {
    let kd = kde_estimate(&set(&[0.0], 1, -1.0, 1.0), 1.0, 1, kernel(1)).unwrap();
    assert!((kd.eval(&[0.0]) - (2.0 * std::f64::consts::PI).sqrt().recip()).abs() < 1e-12);
}

#[test]
fn bandwidth_identity_and_schedule() {
    assert!((bandwidth_schedule(16).unwrap() - 0.5).abs() < 1e-15);
    let mut prev = f64::INFINITY;
    for t in 1..=10_000 {
        let b = bandwidth_schedule(t).unwrap();
        assert!(b < prev);
        prev = b;
    }
    let (bt, t, s) = (0.37, 500, 123);
    let bs = effective_bandwidth(bt, t, s).unwrap();
    assert!((bs * (s as f64 / t as f64).sqrt() - bt).abs() < 1e-15);
}

proptest! {
    #[test]
    fn kde_mass_never_exceeds_one(points in prop::collection::vec(-3.0..3.0f64, 1..30), lo in -4.0..0.0f64, w in 0.5..6.0f64) {
        let t = points.len() + 3;
        let s = set(&points, t, -3.0, 3.0);
        let kd = kde_estimate(&s, bandwidth_schedule(t).unwrap(), t, kernel(1)).unwrap();
        let g = GridSpec { domain: BoxDomain::cube(1, lo, lo + w).unwrap(), points_per_axis: 801 };
        prop_assert!(kd.on_grid(&g).integral() <= 1.0 + 1e-9);
    }

    #[test]
    fn kde_is_translation_equivariant(points in prop::collection::vec(-1.0..1.0f64, 1..20), c in -2.0..2.0f64) {
        let t = 2 * points.len();
        let b = bandwidth_schedule(t).unwrap();
        let kd = kde_estimate(&set(&points, t, -5.0, 5.0), b, t, kernel(1)).unwrap();
        let shifted: Vec<f64> = points.iter().map(|p| p + c).collect();
        let ks = kde_estimate(&set(&shifted, t, -5.0, 5.0), b, t, kernel(1)).unwrap();
        for x in [-1.5, -0.3, 0.0, 0.4, 1.2] {
            let a = kd.eval(&[x]);
            let bb = ks.eval(&[x + c]);
            prop_assert!((a - bb).abs() <= 1e-12 * (1.0 + a));
        }
    }

    #[test]
    fn alignment_removes_constant_shifts(c in -10.0..10.0f64) {
        let axes = vec![psgld_irl_core::numeric::linspace(-2.0, 2.0, 201)];
        let j = GridFunction::from_fn(axes.clone(), |x| 0.5 * x[0] * x[0]);
        let shifted = j.map(|v| v + c);
        for mode in [AlignMode::Min, AlignMode::ModeMatch] {
            prop_assert!(align_grids(&shifted, &j, mode).unwrap().l1_error().unwrap() < 1e-12);
        }
    }
}

#[test]
fn kde_mass_is_one_with_wide_margin() {
    let pts = [-0.4, 0.1, 0.3, 0.35];
    let t = 4;
    let kd = kde_estimate(&set(&pts, t, -1.0, 1.0), bandwidth_schedule(t).unwrap(), t, kernel(1)).unwrap();
    let m = 5.0 * kd.b_s();
    let g = GridSpec { domain: BoxDomain::cube(1, -0.4 - m, 0.35 + m).unwrap(), points_per_axis: 4001 };
    assert!((kd.on_grid(&g).integral() - 1.0).abs() < 1e-3);
}

#[test]
fn two_dimensional_kde_mass() {
    let pts: Vec<ParamVector> = vec![vec![0.0, 0.1], vec![-0.2, 0.3], vec![0.4, -0.1]].into_iter().map(ParamVector::new).collect();
    let s = SampleSet { samples: pts, t_attempted: 3, domain: BoxDomain::cube(2, -1.0, 1.0).unwrap() };
    let kd = kde_estimate(&s, 0.3, 3, kernel(2)).unwrap();
    let g = GridSpec { domain: BoxDomain::cube(2, -4.0, 4.0).unwrap(), points_per_axis: 201 };
    assert!((kd.on_grid(&g).integral() - 1.0).abs() < 1e-3);
}

#[test]
fn cost_transform_examples() {
    let axes = vec![psgld_irl_core::numeric::linspace(-2.0, 2.0, 201)];
    let flat = GridFunction::from_fn(axes.clone(), |_| 0.25);
    let c = cost_from_density(&flat, 2.0, 1e-8, 1.0).unwrap();
    assert!(c.cost.values.iter().all(|v| (v - (-(0.25f64).ln() / 2.0)).abs() < 1e-15));

    let beta = 2.0;
    let gibbs = GridFunction::from_fn(axes.clone(), |x| (beta / (2.0 * std::f64::consts::PI)).sqrt() * (-beta * 0.5 * x[0] * x[0]).exp());
    let est = cost_from_density(&gibbs, beta, 1e-300, 1.0).unwrap();
    let q = QuadraticCost::new(1, 1.0, 0.0).unwrap();
    assert!(alignment_normalize(&est, &q, AlignMode::Min).unwrap().l1_error().unwrap() < 1e-12);

    let tiny = GridFunction::from_fn(axes, |x| if x[0] > 1.0 { 1e-30 } else { 0.2 });
    let capped = cost_from_density(&tiny, 2.0, 1e-6, 1.0).unwrap();
    let cap = -(1e-6f64).ln() / 2.0;
    assert!(capped.cost.values.iter().all(|&v| v <= cap + 1e-12));
    assert!(cost_from_density(&tiny, 2.0, 0.0, 1.0).is_err());
}

#[test]
fn scale_mismatch_is_not_aligned_away() {
    let axes = vec![psgld_irl_core::numeric::linspace(-2.0, 2.0, 201)];
    let j = GridFunction::from_fn(axes, |x| 0.5 * x[0] * x[0]);
    let doubled = j.map(|v| 2.0 * v);
    assert!(align_grids(&doubled, &j, AlignMode::Min).unwrap().l1_error().unwrap() > 1.0);
}

#[test]
fn domain_examples() {
    let d = construct_domains(&BoxDomain::cube(1, -1.0, 1.0).unwrap(), 1.0, 0.01, 0.9).unwrap();
    assert_eq!(d.theta.lo(), &[-2.0]);
    assert_eq!(d.theta.hi(), &[2.0]);
    assert!((d.xi_lower - 0.7921).abs() < 1e-12);
    let z = construct_domains(&BoxDomain::cube(1, -1.0, 1.0).unwrap(), 0.5, 0.0, 0.8).unwrap();
    assert!((z.xi_lower - 0.64).abs() < 1e-15);
    assert!(construct_domains(&BoxDomain::cube(1, -1.0, 1.0).unwrap(), 0.1, 0.5, 0.5).is_err());
}
