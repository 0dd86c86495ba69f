//! Tabular MDP forward learner with trigonometric policies.
//!
//! Each state `s` owns `|A| - 1` angles in `[0, pi]`. Action probabilities
//! are products of `sin^2` and `cos^2` of those angles, for example
//! `(sin^2 t, cos^2 t)` with two actions and
//! `(sin^2 t1 sin^2 t2, sin^2 t1 cos^2 t2, cos^2 t1)` with three.
//! The learner runs REINFORCE on the regularized discounted cost.

use crate::cost::{CostModel, StructuralInput};
use crate::error::{Error, Result};
use crate::forward::{run_reinit_sgd, ReinitSgd, SgdConfig};
use crate::numeric::{central_gradient, solve_linear};
use crate::param::{norm, BoxDomain, ParamVector};
use crate::rng::RandomSource;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// `max_t |sin(2t) ln(tan^2 t)|`.
pub const ENTROPY_SLOPE_CONST: f64 = 1.325_486_838_7;

/// Finite MDP with costs.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    cost: Vec<f64>,
    discount: f64,
    rho0: Vec<f64>,
}

impl TabularMdp {
    /// Builds and validates an MDP.
    ///
    /// `transition[s][a][s']`, `cost[s][a]`, `rho0[s]`.
    pub fn new(transition: Vec<Vec<Vec<f64>>>, cost: Vec<Vec<f64>>, discount: f64, rho0: Vec<f64>) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::Empty("state space"));
        }
        let n_actions = transition[0].len();
        if n_actions < 2 {
            return Err(Error::invalid("n_actions", "need at least two actions"));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::invalid("discount", "must lie in [0, 1)"));
        }
        if cost.len() != n_states || rho0.len() != n_states {
            return Err(Error::DimensionMismatch { expected: n_states, got: cost.len().min(rho0.len()) });
        }
        let mut flat_p = Vec::with_capacity(n_states * n_actions * n_states);
        for row in &transition {
            if row.len() != n_actions {
                return Err(Error::DimensionMismatch { expected: n_actions, got: row.len() });
            }
            for dist in row {
                check_simplex(dist, n_states, "transition row")?;
                flat_p.extend_from_slice(dist);
            }
        }
        let mut flat_c = Vec::with_capacity(n_states * n_actions);
        for row in &cost {
            if row.len() != n_actions {
                return Err(Error::DimensionMismatch { expected: n_actions, got: row.len() });
            }
            if row.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                return Err(Error::invalid("cost", "entries must be nonnegative and finite"));
            }
            flat_c.extend_from_slice(row);
        }
        check_simplex(&rho0, n_states, "rho0")?;
        Ok(TabularMdp { n_states, n_actions, transition: flat_p, cost: flat_c, discount, rho0 })
    }

    /// Number of states.
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Number of actions.
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Discount factor.
    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Initial distribution.
    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    /// `P(s' | s, a)` as a slice over `s'`.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.transition[i..i + self.n_states]
    }

    /// `C(s, a)`.
    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.cost[s * self.n_actions + a]
    }

    /// Largest stage cost.
    pub fn max_cost(&self) -> f64 {
        self.cost.iter().copied().fold(0.0, f64::max)
    }

    /// Number of policy angles, `(|A| - 1) |S|`.
    pub fn n_params(&self) -> usize {
        (self.n_actions - 1) * self.n_states
    }

    /// The angle box `[0, pi]^d`.
    pub fn angle_box(&self) -> BoxDomain {
        BoxDomain::cube(self.n_params(), 0.0, PI).expect("nonempty box")
    }

    /// Same MDP with states renumbered by `perm` (new index `perm[s]` for old `s`).
    pub fn permute_states(&self, perm: &[usize]) -> Result<TabularMdp> {
        let n = self.n_states;
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: perm.len() });
        }
        let mut p = vec![vec![vec![0.0; n]; self.n_actions]; n];
        let mut c = vec![vec![0.0; self.n_actions]; n];
        let mut r = vec![0.0; n];
        for s in 0..n {
            r[perm[s]] = self.rho0[s];
            for a in 0..self.n_actions {
                c[perm[s]][a] = self.cost(s, a);
                for (s2, &q) in self.transition(s, a).iter().enumerate() {
                    p[perm[s]][a][perm[s2]] = q;
                }
            }
        }
        TabularMdp::new(p, c, self.discount, r)
    }
}

fn check_simplex(p: &[f64], n: usize, what: &'static str) -> Result<()> {
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    if p.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(what, "must be a probability vector"));
    }
    Ok(())
}

/// Policy regularizer `f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regularizer {
    /// `|theta|^2`.
    L2,
    /// `sum_s sum_a p log p`.
    NegEntropy,
}

/// Trigonometric policy parameters; state `s` owns `theta[s(|A|-1)..(s+1)(|A|-1)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolicy {
    /// Angles.
    pub theta: ParamVector,
    /// Number of actions.
    pub n_actions: usize,
}

impl TrigPolicy {
    /// Wraps angles for an MDP.
    pub fn new(mdp: &TabularMdp, theta: ParamVector) -> Result<Self> {
        crate::error::check_dim(mdp.n_params(), theta.dim())?;
        Ok(TrigPolicy { theta, n_actions: mdp.n_actions })
    }

    /// Angles of state `s`.
    pub fn angles(&self, s: usize) -> &[f64] {
        let w = self.n_actions - 1;
        &self.theta[s * w..(s + 1) * w]
    }

    /// Action probabilities at state `s`.
    pub fn probs(&self, s: usize) -> Vec<f64> {
        policy_probs(self.angles(s))
    }
}

/// Number of leading `sin^2` factors for action `a`; action `a >= 1` also
/// carries `cos^2` of angle `j`.
fn sin_count(a: usize, n_actions: usize) -> usize {
    n_actions - 1 - a
}

/// Action probabilities for one state's angles.
pub fn policy_probs(angles: &[f64]) -> Vec<f64> {
    let n = angles.len() + 1;
    let s2: Vec<f64> = angles.iter().map(|t| libm::sin(*t) * libm::sin(*t)).collect();
    let c2: Vec<f64> = angles.iter().map(|t| libm::cos(*t) * libm::cos(*t)).collect();
    (0..n)
        .map(|a| {
            let j = sin_count(a, n);
            let mut p: f64 = s2[..j].iter().product();
            if j < n - 1 {
                p *= c2[j];
            }
            p
        })
        .collect()
}

/// `grad_angles log p(a)` for one state's angles.
pub fn log_policy_grad(angles: &[f64], a: usize) -> Vec<f64> {
    let n = angles.len() + 1;
    let j = sin_count(a, n);
    let mut g = vec![0.0; angles.len()];
    for (i, t) in angles.iter().enumerate().take(j) {
        g[i] = 2.0 * libm::cos(*t) / libm::sin(*t);
    }
    if j < n - 1 {
        g[j] = -2.0 * libm::tan(angles[j]);
    }
    g
}

/// `d p(a) / d angle_i` for every action and angle, row-major `[a][i]`.
fn policy_jacobian(angles: &[f64]) -> Vec<Vec<f64>> {
    let n = angles.len() + 1;
    let s2: Vec<f64> = angles.iter().map(|t| libm::sin(*t) * libm::sin(*t)).collect();
    let c2: Vec<f64> = angles.iter().map(|t| libm::cos(*t) * libm::cos(*t)).collect();
    let d: Vec<f64> = angles.iter().map(|t| libm::sin(2.0 * t)).collect();
    (0..n)
        .map(|a| {
            let j = sin_count(a, n);
            let mut factors: Vec<(usize, f64, f64)> = (0..j).map(|i| (i, s2[i], d[i])).collect();
            if j < n - 1 {
                factors.push((j, c2[j], -d[j]));
            }
            let mut row = vec![0.0; angles.len()];
            for (k, &(i, _, di)) in factors.iter().enumerate() {
                let rest: f64 = factors.iter().enumerate().filter(|(l, _)| *l != k).map(|(_, f)| f.1).product();
                row[i] = di * rest;
            }
            row
        })
        .collect()
}

/// Regularizer value.
pub fn regularizer_value(pol: &TrigPolicy, n_states: usize, reg: Regularizer) -> f64 {
    match reg {
        Regularizer::L2 => pol.theta.norm_sq(),
        Regularizer::NegEntropy => (0..n_states)
            .map(|s| pol.probs(s).iter().map(|&p| if p > 0.0 { p * libm::log(p) } else { 0.0 }).sum::<f64>())
            .sum(),
    }
}

/// Regularizer gradient.
pub fn regularizer_grad(pol: &TrigPolicy, n_states: usize, reg: Regularizer) -> ParamVector {
    match reg {
        Regularizer::L2 => pol.theta.clone().scale(2.0),
        Regularizer::NegEntropy => {
            let w = pol.n_actions - 1;
            let mut g = ParamVector::zeros(pol.theta.dim());
            for s in 0..n_states {
                let probs = pol.probs(s);
                let jac = policy_jacobian(pol.angles(s));
                for (a, row) in jac.iter().enumerate() {
                    if probs[a] > 0.0 {
                        let f = libm::log(probs[a]) + 1.0;
                        for (i, d) in row.iter().enumerate() {
                            g[s * w + i] += f * d;
                        }
                    }
                }
            }
            g
        }
    }
}

/// Per-coordinate bound on `|d f / d theta_i|` over the angle box for the
/// negative-entropy regularizer.
pub fn entropy_slope_bound(n_actions: usize) -> f64 {
    ENTROPY_SLOPE_CONST + libm::log((n_actions - 1) as f64)
}

fn policy_matrices(mdp: &TabularMdp, pol: &TrigPolicy) -> (Vec<f64>, Vec<f64>) {
    let n = mdp.n_states;
    let mut p_pi = vec![0.0; n * n];
    let mut c_pi = vec![0.0; n];
    for s in 0..n {
        let probs = pol.probs(s);
        for (a, &pa) in probs.iter().enumerate() {
            c_pi[s] += pa * mdp.cost(s, a);
            for (s2, &q) in mdp.transition(s, a).iter().enumerate() {
                p_pi[s * n + s2] += pa * q;
            }
        }
    }
    (p_pi, c_pi)
}

/// Infinite-horizon regularized cost `rho0^T (I - g P_pi)^{-1} c_pi + lambda f`.
pub fn exact_cost(mdp: &TabularMdp, pol: &TrigPolicy, lambda: f64, reg: Regularizer) -> Result<f64> {
    let n = mdp.n_states;
    let (p_pi, c_pi) = policy_matrices(mdp, pol);
    let mut a = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            a[r * n + c] = if r == c { 1.0 } else { 0.0 } - mdp.discount * p_pi[r * n + c];
        }
    }
    let v = solve_linear(a, c_pi)?;
    let j: f64 = mdp.rho0.iter().zip(&v).map(|(r, v)| r * v).sum();
    Ok(j + lambda * regularizer_value(pol, n, reg))
}

/// Regularized cost truncated after stage `horizon`: `E sum_{t=0}^{T} g^t c_t + lambda f`.
pub fn exact_cost_truncated(mdp: &TabularMdp, pol: &TrigPolicy, lambda: f64, reg: Regularizer, horizon: usize) -> f64 {
    let n = mdp.n_states;
    let (p_pi, c_pi) = policy_matrices(mdp, pol);
    let mut d = mdp.rho0.clone();
    let mut total = 0.0;
    let mut disc = 1.0;
    for _ in 0..=horizon {
        total += disc * d.iter().zip(&c_pi).map(|(a, b)| a * b).sum::<f64>();
        let mut next = vec![0.0; n];
        for s in 0..n {
            for s2 in 0..n {
                next[s2] += d[s] * p_pi[s * n + s2];
            }
        }
        d = next;
        disc *= mdp.discount;
    }
    total + lambda * regularizer_value(pol, n, reg)
}

/// `c_max g^{T+1} / (1 - g)`: bound on the cost dropped by truncation.
pub fn truncation_tail_bound(mdp: &TabularMdp, horizon: usize) -> f64 {
    mdp.max_cost() * libm::pow(mdp.discount, horizon as f64 + 1.0) / (1.0 - mdp.discount)
}

/// A sample path `(s_0, a_0, c_0, ..., s_T, a_T, c_T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Visited states.
    pub states: Vec<usize>,
    /// Chosen actions.
    pub actions: Vec<usize>,
    /// Incurred costs.
    pub costs: Vec<f64>,
}

/// Samples `horizon + 1` stages.
pub fn sample_trajectory(mdp: &TabularMdp, pol: &TrigPolicy, horizon: usize, rng: &mut RandomSource) -> Trajectory {
    let mut tr = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon + 1),
        costs: Vec::with_capacity(horizon + 1),
    };
    let mut s = rng.categorical(&mdp.rho0);
    for t in 0..=horizon {
        let a = rng.categorical(&pol.probs(s));
        tr.states.push(s);
        tr.actions.push(a);
        tr.costs.push(mdp.cost(s, a));
        if t < horizon {
            s = rng.categorical(mdp.transition(s, a));
        }
    }
    tr
}

/// REINFORCE estimate from one trajectory.
pub fn reinforce_from_trajectory(
    mdp: &TabularMdp,
    pol: &TrigPolicy,
    lambda: f64,
    reg: Regularizer,
    tr: &Trajectory,
) -> ParamVector {
    let w = pol.n_actions - 1;
    let mut g = regularizer_grad(pol, mdp.n_states, reg).scale(lambda);
    let t_len = tr.costs.len();
    let mut to_go = vec![0.0; t_len];
    let mut acc = 0.0;
    for t in (0..t_len).rev() {
        acc = tr.costs[t] + mdp.discount * acc;
        to_go[t] = acc;
    }
    let mut disc = 1.0;
    for t in 0..t_len {
        if to_go[t] != 0.0 {
            let s = tr.states[t];
            let score = log_policy_grad(pol.angles(s), tr.actions[t]);
            for (i, sc) in score.iter().enumerate() {
                g[s * w + i] += disc * sc * to_go[t];
            }
        }
        disc *= mdp.discount;
    }
    g
}

/// One REINFORCE draw: a noisy gradient of the truncated regularized cost.
pub fn reinforce_gradient(
    mdp: &TabularMdp,
    pol: &TrigPolicy,
    lambda: f64,
    reg: Regularizer,
    horizon: usize,
    rng: &mut RandomSource,
) -> ParamVector {
    let tr = sample_trajectory(mdp, pol, horizon, rng);
    reinforce_from_trajectory(mdp, pol, lambda, reg, &tr)
}

/// The truncated regularized MDP cost as a [`CostModel`] whose noisy gradient is REINFORCE.
///
/// `grad` is a central difference of `value`.
#[derive(Clone, Debug)]
pub struct MdpCost {
    mdp: TabularMdp,
    lambda: f64,
    reg: Regularizer,
    horizon: usize,
    constants: StructuralInput,
}

impl MdpCost {
    /// Builds the cost with box-derived structural constants.
    pub fn new(mdp: TabularMdp, lambda: f64, reg: Regularizer, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be nonnegative"));
        }
        let constants = box_constants(&mdp, lambda, reg);
        Ok(MdpCost { mdp, lambda, reg, horizon, constants })
    }

    /// Replaces the structural constants.
    pub fn with_constants(mut self, sc: StructuralInput) -> Self {
        self.constants = sc;
        self
    }

    /// Underlying MDP.
    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    fn policy(&self, x: &[f64]) -> TrigPolicy {
        TrigPolicy { theta: ParamVector::from(x), n_actions: self.mdp.n_actions }
    }
}

/// Structural constants on the angle box.
///
/// The cost part uses `|dp/dtheta| <= 1` per action, which bounds first and
/// second derivatives of the discounted cost by `2 c_max / (1-g)^2` and
/// `4 c_max / (1-g)^3`. On a bounded box dissipativity holds with `m = 1` and
/// `b = d pi^2 + sqrt(d) pi L_J`. The entropy curvature is taken where every
/// probability is at least `1e-6`.
pub fn box_constants(mdp: &TabularMdp, lambda: f64, reg: Regularizer) -> StructuralInput {
    let d = mdp.n_params() as f64;
    let g = mdp.discount;
    let c = mdp.max_cost();
    let (f_slope, f_curv) = match reg {
        Regularizer::L2 => (2.0 * PI, 2.0),
        Regularizer::NegEntropy => {
            let na = mdp.n_actions as f64;
            (entropy_slope_bound(mdp.n_actions), na * (4.0 + 2.0 * (libm::log(1e6) + 1.0)))
        }
    };
    let l_j = libm::sqrt(d) * (2.0 * c / ((1.0 - g) * (1.0 - g)) + lambda * f_slope);
    let l_grad_j = (d * (4.0 * c / libm::pow(1.0 - g, 3.0) + lambda * f_curv)).max(1e-12);
    StructuralInput {
        l_j: l_j.max(1e-12),
        l_grad_j,
        m: 1.0,
        b: d * PI * PI + libm::sqrt(d) * PI * l_j,
        a: c / (1.0 - g) + lambda * d.max(1.0),
        b_grad: l_j,
        zeta: 0.0,
        dim: mdp.n_params(),
    }
}

impl CostModel for MdpCost {
    fn dim(&self) -> usize {
        self.mdp.n_params()
    }
    fn value(&self, x: &[f64]) -> f64 {
        exact_cost_truncated(&self.mdp, &self.policy(x), self.lambda, self.reg, self.horizon)
    }
    fn grad(&self, x: &[f64]) -> ParamVector {
        let h = 1e-5 * (1.0 + norm(x));
        ParamVector::new(central_gradient(|y| self.value(y), x, h))
    }
    fn noisy_grad(&self, x: &[f64], rng: &mut RandomSource) -> ParamVector {
        reinforce_gradient(&self.mdp, &self.policy(x), self.lambda, self.reg, self.horizon, rng)
    }
    fn constants(&self) -> StructuralInput {
        self.constants.clone()
    }
}

/// Re-initializing REINFORCE on the angle box.
pub fn run_reinforce_forward(cost: &MdpCost, cfg: SgdConfig, rng: RandomSource) -> Result<ReinitSgd<'_, MdpCost>> {
    Ok(run_reinit_sgd(cost, cfg, rng)?.with_projection(cost.mdp.angle_box()))
}
