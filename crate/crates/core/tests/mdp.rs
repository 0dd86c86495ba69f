use proptest::prelude::*;
use psgld_irl_core::forward::{collect_events, monitor_assumptions, MonitorOptions, SgdConfig};
use psgld_irl_core::mdp::{
    entropy_slope_bound, exact_cost, exact_cost_truncated, log_policy_grad, policy_probs, reinforce_gradient,
    regularizer_value, run_reinforce_forward, sample_trajectory, MdpCost, Regularizer, TabularMdp, TrigPolicy,
};
use psgld_irl_core::numeric::central_gradient;
use psgld_irl_core::{ParamVector, RandomSource, ScaledDistribution};
use std::f64::consts::PI;

fn chain() -> TabularMdp {
    TabularMdp::new(
        vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]],
        vec![vec![1.0, 0.0], vec![0.5, 2.0]],
        0.9,
        vec![0.5, 0.5],
    )
    .unwrap()
}

fn three_state() -> TabularMdp {
    TabularMdp::new(
        vec![
            vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8], vec![0.3, 0.3, 0.4]],
            vec![vec![0.0, 1.0, 0.0], vec![0.5, 0.25, 0.25], vec![0.2, 0.2, 0.6]],
            vec![vec![0.6, 0.0, 0.4], vec![0.1, 0.8, 0.1], vec![0.33, 0.33, 0.34]],
        ],
        vec![vec![1.0, 0.2, 0.7], vec![0.0, 1.5, 0.3], vec![0.9, 0.4, 2.0]],
        0.8,
        vec![0.2, 0.5, 0.3],
    )
    .unwrap()
}

proptest! {
    #[test]
    fn probabilities_form_a_simplex(angles in prop::collection::vec(0.0..PI, 1..4)) {
        let p = policy_probs(&angles);
        prop_assert_eq!(p.len(), angles.len() + 1);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_matches_finite_differences(angles in prop::collection::vec(0.2..(PI / 2.0 - 0.2), 1..4), a_seed in 0usize..4) {
        let a = a_seed % (angles.len() + 1);
        let g = log_policy_grad(&angles, a);
        let fd = central_gradient(|x| libm::log(policy_probs(x)[a]), &angles, 1e-6);
        for (x, y) in g.iter().zip(&fd) {
            prop_assert!((x - y).abs() <= 1e-5 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn exact_cost_is_invariant_under_relabeling(t in prop::collection::vec(0.0..PI, 6), perm_id in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = perms[perm_id];
        let m = three_state();
        let pm = m.permute_states(&perm).unwrap();
        let mut moved = vec![0.0; 6];
        for s in 0..3 {
            moved[2 * perm[s]] = t[2 * s];
            moved[2 * perm[s] + 1] = t[2 * s + 1];
        }
        for reg in [Regularizer::L2, Regularizer::NegEntropy] {
            let a = exact_cost(&m, &TrigPolicy::new(&m, ParamVector::new(t.clone())).unwrap(), 0.0, reg).unwrap();
            let b = exact_cost(&pm, &TrigPolicy::new(&pm, ParamVector::new(moved.clone())).unwrap(), 0.0, reg).unwrap();
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
        let a = exact_cost(&m, &TrigPolicy::new(&m, ParamVector::new(t.clone())).unwrap(), 0.3, Regularizer::NegEntropy).unwrap();
        let b = exact_cost(&pm, &TrigPolicy::new(&pm, ParamVector::new(moved)).unwrap(), 0.3, Regularizer::NegEntropy).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn entropy_slope_never_exceeds_bound(t in prop::collection::vec(0.01..(PI - 0.01), 3)) {
        let bound = entropy_slope_bound(4);
        let f = |x: &[f64]| regularizer_value(&TrigPolicy { theta: ParamVector::from(x), n_actions: 4 }, 1, Regularizer::NegEntropy);
        let g = central_gradient(f, &t, 1e-7);
        for v in g {
            prop_assert!(v.abs() <= bound * (1.0 + 1e-6));
        }
    }
}

#[test]
fn three_action_display() {
    let p = policy_probs(&[PI / 2.0, PI / 2.0]);
    assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15 && p[2].abs() < 1e-15);
}

#[test]
fn exact_cost_matches_rollouts() {
    let m = chain();
    let pol = TrigPolicy::new(&m, ParamVector::new(vec![0.7, 1.9])).unwrap();
    let exact = exact_cost(&m, &pol, 0.0, Regularizer::L2).unwrap();
    let mut rng = RandomSource::new(21, 0);
    let n = 100_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let tr = sample_trajectory(&m, &pol, 200, &mut rng);
        let v: f64 = tr.costs.iter().rev().fold(0.0, |acc, c| c + 0.9 * acc);
        s1 += v;
        s2 += v * v;
    }
    let mean = s1 / n as f64;
    let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn reinforce_mean_matches_truncated_gradient() {
    let m = chain();
    let theta = vec![0.9, 1.2];
    let pol = TrigPolicy::new(&m, ParamVector::new(theta.clone())).unwrap();
    let (lambda, horizon) = (0.1, 30);
    let fd = central_gradient(
        |x| exact_cost_truncated(&m, &TrigPolicy { theta: ParamVector::from(x), n_actions: 2 }, lambda, Regularizer::L2, horizon),
        &theta,
        1e-5,
    );
    let mut rng = RandomSource::new(22, 0);
    let n = 10_000;
    let mut s1 = [0.0; 2];
    let mut s2 = [0.0; 2];
    for _ in 0..n {
        let g = reinforce_gradient(&m, &pol, lambda, Regularizer::L2, horizon, &mut rng);
        for i in 0..2 {
            s1[i] += g[i];
            s2[i] += g[i] * g[i];
        }
    }
    for i in 0..2 {
        let mean = s1[i] / n as f64;
        let se = ((s2[i] / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - fd[i]).abs() < 3.0 * se, "coordinate {i}: {mean} vs {} (se {se})", fd[i]);
    }
}

#[test]
fn deterministic_chain_gives_reproducible_gradient() {
    let m = TabularMdp::new(
        vec![vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![1.0, 0.0]]],
        vec![vec![1.0, 3.0], vec![2.0, 0.5]],
        0.5,
        vec![1.0, 0.0],
    )
    .unwrap();
    let pol = TrigPolicy::new(&m, ParamVector::new(vec![PI / 2.0, PI / 2.0])).unwrap();
    let a = reinforce_gradient(&m, &pol, 0.2, Regularizer::L2, 4, &mut RandomSource::new(1, 0));
    let b = reinforce_gradient(&m, &pol, 0.2, Regularizer::L2, 4, &mut RandomSource::new(99, 3));
    assert_eq!(a, b);
    // action 0 always; path 0,1,0,1,0 with costs 1,2,1,2,1; score of action 0 at pi/2 is 2 cot = 0
    for i in 0..2 {
        assert!((a[i] - 0.2 * 2.0 * (PI / 2.0)).abs() < 1e-12);
    }
}

#[test]
fn regularizer_only_forward_contracts_geometrically() {
    let m = TabularMdp::new(
        vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]],
        vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        0.9,
        vec![0.5, 0.5],
    )
    .unwrap();
    let (lambda, eta) = (0.5, 0.1);
    let cost = MdpCost::new(m, lambda, Regularizer::L2, 10).unwrap();
    let cfg = SgdConfig { eta, c_opt: 1e-3, max_iters: 50, dist: ScaledDistribution::gaussian(2, 0.25, 1.0).unwrap() };
    let it = run_reinforce_forward(&cost, cfg, RandomSource::new(3, 0)).unwrap().with_initial(ParamVector::new(vec![2.0, 1.0]));
    let events = collect_events(it).unwrap();
    let r = 1.0 - 2.0 * eta * lambda;
    for (k, ev) in events.iter().enumerate().take(30) {
        assert!((ev.theta[0] - 2.0 * r.powi(k as i32)).abs() < 1e-12);
        assert!((ev.theta[1] - r.powi(k as i32)).abs() < 1e-12);
    }
    let rep = monitor_assumptions(&events, 1e-3, &MonitorOptions::default()).unwrap();
    assert!(rep.a1_i);
}

#[test]
fn reinforce_forward_is_noisy_and_stays_in_box() {
    let cost = MdpCost::new(chain(), 0.1, Regularizer::L2, 30).unwrap();
    let run = |seed| {
        let cfg = SgdConfig { eta: 0.01, c_opt: 0.05, max_iters: 300, dist: ScaledDistribution::gaussian(2, 0.25, 4.0).unwrap() };
        collect_events(run_reinforce_forward(&cost, cfg, RandomSource::new(seed, 0)).unwrap()).unwrap()
    };
    let (a, b) = (run(1), run(2));
    assert_ne!(a, b);
    for ev in a.iter().chain(&b) {
        assert!(ev.theta.iter().all(|t| (0.0..=PI).contains(t)));
    }
    let rep = monitor_assumptions(&a, 0.05, &MonitorOptions::default()).unwrap();
    assert!(rep.a1_i && rep.a1_iv);
}
