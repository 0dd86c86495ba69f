//! Forward learners and the gradient event streams they leak.
//!
//! [`ReinitSgd`] is the re-initializing SGD learner; [`SgldForward`] is a
//! classical Langevin learner; [`federated_sequentialize`] chains worker
//! streams into one. [`monitor_assumptions`] checks an event log against the
//! structural requirements on the forward process.

use crate::cost::CostModel;
use crate::dist::{BaseDistribution, ScaledDistribution};
use crate::error::{Error, Result};
use crate::numeric::solve_linear;
use crate::param::{norm_sq, BoxDomain, ParamVector};
use crate::rng::RandomSource;
use alloc::vec;
use alloc::vec::Vec;

/// Divergence guard on iterate norms.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Consecutive below-threshold draws tolerated before giving up.
pub const MAX_REINIT_DRAWS: u64 = 1_000_000;

/// One observation leaked by the forward learner.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEvent {
    /// Iteration index.
    pub k: u64,
    /// Iterate `theta_k`.
    pub theta: ParamVector,
    /// Noisy gradient evaluated at `theta_k`.
    pub noisy_grad: ParamVector,
    /// `theta_k` is a fresh draw from the sampling distribution.
    pub reinit: bool,
    /// Last event of the stream.
    pub terminal: bool,
}

/// Re-initializing SGD configuration.
#[derive(Clone, Debug)]
pub struct SgdConfig {
    /// Step size.
    pub eta: f64,
    /// Gradient-norm threshold below which the learner restarts.
    pub c_opt: f64,
    /// Iteration cap; the event with index `max_iters` is terminal.
    pub max_iters: u64,
    /// Sampling distribution for restarts.
    pub dist: ScaledDistribution,
}

impl SgdConfig {
    /// Checks `eta > 0` and `c_opt > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", "must be positive"));
        }
        if !(self.c_opt > 0.0 && self.c_opt.is_finite()) {
            return Err(Error::invalid("c_opt", "must be positive"));
        }
        Ok(())
    }

    /// Restart scale.
    pub fn gamma(&self) -> f64 {
        self.dist.gamma()
    }
}

/// Upper end of the admissible step-size interval, `1 ∧ m / (4 L^2)`.
pub fn eta_upper_bound(m: f64, l_grad_j: f64) -> f64 {
    (m / (4.0 * l_grad_j * l_grad_j)).min(1.0)
}

/// Re-initializing SGD as an iterator of events.
pub struct ReinitSgd<'a, C: CostModel + ?Sized> {
    cost: &'a C,
    cfg: SgdConfig,
    rng: RandomSource,
    theta: Option<ParamVector>,
    fresh: bool,
    k: u64,
    done: bool,
    projection: Option<BoxDomain>,
}

/// Starts re-initializing SGD.
pub fn run_reinit_sgd<'a, C: CostModel + ?Sized>(
    cost: &'a C,
    cfg: SgdConfig,
    rng: RandomSource,
) -> Result<ReinitSgd<'a, C>> {
    cfg.validate()?;
    crate::error::check_dim(cost.dim(), cfg.dist.dim())?;
    Ok(ReinitSgd { cost, cfg, rng, theta: None, fresh: true, k: 0, done: false, projection: None })
}

impl<'a, C: CostModel + ?Sized> ReinitSgd<'a, C> {
    /// Uses `theta0` instead of a random first draw.
    pub fn with_initial(mut self, theta0: ParamVector) -> Self {
        self.theta = Some(theta0);
        self
    }

    /// Projects every iterate onto `domain` and restricts restarts to it.
    pub fn with_projection(mut self, domain: BoxDomain) -> Self {
        self.projection = Some(domain);
        self
    }

    fn draw(&mut self) -> Result<ParamVector> {
        let Some(domain) = &self.projection else {
            return Ok(self.cfg.dist.sample(&mut self.rng));
        };
        for _ in 0..MAX_REINIT_DRAWS {
            let x = self.cfg.dist.sample(&mut self.rng);
            if domain.contains(&x) {
                return Ok(x);
            }
        }
        Err(Error::ReinitStalled(MAX_REINIT_DRAWS))
    }

    fn step(&mut self) -> Result<Option<GradientEvent>> {
        let mut draws = 0u64;
        loop {
            let theta = match self.theta.take() {
                Some(t) => t,
                None => {
                    self.fresh = true;
                    self.draw()?
                }
            };
            let g = self.cost.noisy_grad(&theta, &mut self.rng);
            if !g.is_finite() {
                return Err(Error::NonFinite("noisy gradient"));
            }
            if self.k == self.cfg.max_iters {
                self.done = true;
                return Ok(Some(GradientEvent { k: self.k, theta, noisy_grad: g, reinit: self.fresh, terminal: true }));
            }
            if g.norm() < self.cfg.c_opt {
                draws += 1;
                if draws >= MAX_REINIT_DRAWS {
                    return Err(Error::ReinitStalled(draws));
                }
                continue;
            }
            let mut next = theta.clone();
            next.axpy(-self.cfg.eta, &g);
            if let Some(domain) = &self.projection {
                domain.project(&mut next);
            }
            let nn = next.norm();
            if !(nn <= DIVERGENCE_NORM) {
                return Err(Error::Diverged { step: self.k + 1, norm: nn });
            }
            let ev = GradientEvent { k: self.k, theta, noisy_grad: g, reinit: self.fresh, terminal: false };
            self.theta = Some(next);
            self.fresh = false;
            self.k += 1;
            return Ok(Some(ev));
        }
    }
}

impl<'a, C: CostModel + ?Sized> Iterator for ReinitSgd<'a, C> {
    type Item = Result<GradientEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.step() {
            Ok(ev) => ev.map(Ok),
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// The gradient applied by one SGD step: `(theta_prev - theta_next) / eta`.
pub fn gradient_recovery(theta_prev: &[f64], theta_next: &[f64], eta: f64) -> Result<ParamVector> {
    if !(eta > 0.0) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    crate::error::check_dim(theta_prev.len(), theta_next.len())?;
    Ok(ParamVector::new(theta_prev.iter().zip(theta_next).map(|(p, n)| (p - n) / eta).collect()))
}

/// Classical SGLD forward learner.
pub struct SgldForward<'a, C: CostModel + ?Sized> {
    cost: &'a C,
    eta: f64,
    noise_scale: f64,
    alpha: ParamVector,
    grad_rng: RandomSource,
    noise_rng: RandomSource,
    k: u64,
    max_iters: u64,
    done: bool,
}

/// Starts `alpha_{k+1} = alpha_k - eta g_k + sqrt(2 eta / beta) w_k` from a
/// draw of `dist`.
///
/// Gradient noise and Langevin noise use separate streams, so `beta = inf`
/// reproduces plain SGD for the same source.
pub fn run_sgld_forward<'a, C: CostModel + ?Sized>(
    cost: &'a C,
    eta: f64,
    beta: f64,
    dist: &ScaledDistribution,
    max_iters: u64,
    mut rng: RandomSource,
) -> Result<SgldForward<'a, C>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta", "must be positive"));
    }
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", "must be positive"));
    }
    let noise_rng = rng.child(0x5347_4c44);
    let alpha = dist.sample(&mut rng);
    Ok(SgldForward {
        cost,
        eta,
        noise_scale: libm::sqrt(2.0 * eta / beta),
        alpha,
        grad_rng: rng,
        noise_rng,
        k: 0,
        max_iters,
        done: false,
    })
}

impl<'a, C: CostModel + ?Sized> Iterator for SgldForward<'a, C> {
    type Item = Result<GradientEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let g = self.cost.noisy_grad(&self.alpha, &mut self.grad_rng);
        if !g.is_finite() {
            self.done = true;
            return Some(Err(Error::NonFinite("noisy gradient")));
        }
        let terminal = self.k == self.max_iters;
        let ev = GradientEvent { k: self.k, theta: self.alpha.clone(), noisy_grad: g.clone(), reinit: false, terminal };
        if terminal {
            self.done = true;
            return Some(Ok(ev));
        }
        self.alpha.axpy(-self.eta, &g);
        for v in self.alpha.iter_mut() {
            *v += self.noise_scale * self.noise_rng.standard_normal();
        }
        let nn = self.alpha.norm();
        if !(nn <= DIVERGENCE_NORM) {
            self.done = true;
            return Some(Err(Error::Diverged { step: self.k + 1, norm: nn }));
        }
        self.k += 1;
        Some(Ok(ev))
    }
}

/// Chains worker streams into one sequential stream.
///
/// Indices are renumbered, the first event of every later worker is marked
/// as a restart, and only the final event of the last worker stays terminal.
pub fn federated_sequentialize(workers: Vec<Vec<GradientEvent>>) -> Result<Vec<GradientEvent>> {
    if workers.is_empty() {
        return Err(Error::Empty("worker list"));
    }
    let n_workers = workers.len();
    let mut out = Vec::with_capacity(workers.iter().map(Vec::len).sum());
    for (w, stream) in workers.into_iter().enumerate() {
        for (i, mut ev) in stream.into_iter().enumerate() {
            if i == 0 && w > 0 {
                ev.reinit = true;
            }
            if w + 1 < n_workers {
                ev.terminal = false;
            }
            ev.k = out.len() as u64;
            out.push(ev);
        }
    }
    Ok(out)
}

/// Collects an event iterator, stopping at the first error.
pub fn collect_events(it: impl Iterator<Item = Result<GradientEvent>>) -> Result<Vec<GradientEvent>> {
    it.collect()
}

/// Empirical check of the forward-process requirements.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// Non-terminal events inspected.
    pub n_events: usize,
    /// Smallest noisy-gradient norm among inspected events.
    pub min_grad_norm: f64,
    /// Smallest binned residual variance of the noisy gradient given the iterate.
    pub min_cond_var_estimate: f64,
    /// Largest mean of `|theta|^2` over groups of equal age since restart.
    pub max_sq_norm_estimate: f64,
    /// Mean of `|theta|^2` over all events.
    pub mean_sq_norm: f64,
    /// Gradient norms stay above the threshold.
    pub a1_i: bool,
    /// Conditional gradient variance is bounded away from zero.
    pub a1_ii: bool,
    /// Second moment within the supplied bound, if one was given.
    pub a1_iii: Option<bool>,
    /// The stream starts with a restart.
    pub a1_iv: bool,
}

/// Options for [`monitor_assumptions`].
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorOptions {
    /// Bound to compare the second moment against.
    pub m_theta_bound: Option<f64>,
    /// Variance below which the conditional-variance check fails.
    pub variance_floor: f64,
    /// Minimum group size for age groups and bins.
    pub min_group: usize,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        MonitorOptions { m_theta_bound: None, variance_floor: 1e-10, min_group: 20 }
    }
}

/// Checks an event log against the forward-process requirements.
pub fn monitor_assumptions(events: &[GradientEvent], c_opt: f64, opts: &MonitorOptions) -> Result<AssumptionReport> {
    let live: Vec<&GradientEvent> = events.iter().filter(|e| !e.terminal).collect();
    if live.is_empty() {
        return Err(Error::Empty("non-terminal events"));
    }
    let min_grad_norm = live.iter().map(|e| e.noisy_grad.norm()).fold(f64::INFINITY, f64::min);
    let mean_sq_norm = live.iter().map(|e| e.theta.norm_sq()).sum::<f64>() / live.len() as f64;

    let mut ages = Vec::with_capacity(live.len());
    let mut age = 0usize;
    for (i, e) in live.iter().enumerate() {
        age = if e.reinit || i == 0 { 0 } else { age + 1 };
        ages.push(age);
    }
    let max_age = ages.iter().copied().max().unwrap_or(0);
    let mut sums = vec![(0.0, 0usize); max_age + 1];
    for (e, &a) in live.iter().zip(&ages) {
        sums[a].0 += e.theta.norm_sq();
        sums[a].1 += 1;
    }
    let min_group = opts.min_group.max(1);
    let max_sq_norm_estimate = sums
        .iter()
        .filter(|(_, c)| *c >= min_group.min(live.len()))
        .map(|(s, c)| s / *c as f64)
        .fold(mean_sq_norm, f64::max);

    let min_cond_var_estimate = conditional_variance(&live, min_group);
    Ok(AssumptionReport {
        n_events: live.len(),
        min_grad_norm,
        min_cond_var_estimate,
        max_sq_norm_estimate,
        mean_sq_norm,
        a1_i: min_grad_norm >= c_opt,
        a1_ii: min_cond_var_estimate > opts.variance_floor,
        a1_iii: opts.m_theta_bound.map(|b| max_sq_norm_estimate <= b),
        a1_iv: live[0].reinit,
    })
}

/// Residual variance of an affine fit of the gradient on the iterate, within
/// bins of `|theta|`; returns the smallest over bins.
fn conditional_variance(live: &[&GradientEvent], min_group: usize) -> f64 {
    let n = live[0].theta.dim();
    let p = n + 1;
    let mut order: Vec<usize> = (0..live.len()).collect();
    order.sort_by(|&a, &b| live[a].theta.norm_sq().total_cmp(&live[b].theta.norm_sq()));
    let per_bin = min_group.max(p + 2).max(live.len() / 20);
    let mut best = f64::INFINITY;
    for chunk in order.chunks(per_bin) {
        if chunk.len() < p + 2 {
            continue;
        }
        let mut xtx = vec![0.0; p * p];
        for &i in chunk {
            let row = design_row(&live[i].theta);
            for r in 0..p {
                for c in 0..p {
                    xtx[r * p + c] += row[r] * row[c];
                }
            }
        }
        let mut ssr = 0.0;
        for j in 0..n {
            let mut xty = vec![0.0; p];
            for &i in chunk {
                let row = design_row(&live[i].theta);
                for r in 0..p {
                    xty[r] += row[r] * live[i].noisy_grad[j];
                }
            }
            let coef = match solve_linear(xtx.clone(), xty) {
                Ok(c) => c,
                Err(_) => {
                    let mean = chunk.iter().map(|&i| live[i].noisy_grad[j]).sum::<f64>() / chunk.len() as f64;
                    let mut c = vec![0.0; p];
                    c[0] = mean;
                    c
                }
            };
            for &i in chunk {
                let row = design_row(&live[i].theta);
                let fit: f64 = row.iter().zip(&coef).map(|(a, b)| a * b).sum();
                let r = live[i].noisy_grad[j] - fit;
                ssr += r * r;
            }
        }
        best = best.min(ssr / (chunk.len() - p) as f64);
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

fn design_row(theta: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(theta.len() + 1);
    row.push(1.0);
    row.extend_from_slice(theta);
    row
}

/// Mean of `|theta|^2` over the events of a log.
pub fn mean_sq_norm(events: &[GradientEvent]) -> f64 {
    events.iter().map(|e| norm_sq(&e.theta)).sum::<f64>() / events.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::QuadraticCost;

    fn cfg(eta: f64, c_opt: f64, max_iters: u64, gamma: f64) -> SgdConfig {
        SgdConfig { eta, c_opt, max_iters, dist: ScaledDistribution::gaussian(1, 0.25, gamma).unwrap() }
    }

    #[test]
    fn noiseless_quadratic_decays_geometrically_then_restarts() {
        let cost = QuadraticCost::new(1, 1.0, 0.0).unwrap();
        let events: Vec<GradientEvent> = run_reinit_sgd(&cost, cfg(0.1, 0.01, 60, 1.0), RandomSource::new(1, 0))
            .unwrap()
            .with_initial(ParamVector::new(vec![1.0]))
            .collect::<Result<_>>()
            .unwrap();
        // 0.9^k >= 0.01 for k <= 43
        for (k, ev) in events.iter().take(44).enumerate() {
            assert!((ev.theta[0] - libm::pow(0.9, k as f64)).abs() < 1e-12, "k = {k}");
            assert_eq!(ev.reinit, k == 0);
        }
        assert!(events[44].reinit);
    }

    #[test]
    fn threshold_above_initial_gradient_forces_restart() {
        let cost = QuadraticCost::new(1, 1.0, 0.0).unwrap();
        let mut it = run_reinit_sgd(&cost, cfg(0.1, 0.5, 10, 1.0), RandomSource::new(2, 0))
            .unwrap()
            .with_initial(ParamVector::new(vec![0.1]));
        let first = it.next().unwrap().unwrap();
        assert!(first.reinit);
        assert_ne!(first.theta[0], 0.1);
        assert!(first.noisy_grad.norm() >= 0.5);
    }

    #[test]
    fn zero_iteration_cap_emits_single_terminal_event() {
        let cost = QuadraticCost::new(1, 1.0, 0.1).unwrap();
        let events: Vec<_> = run_reinit_sgd(&cost, cfg(0.1, 0.05, 0, 1.0), RandomSource::new(3, 0)).unwrap().collect();
        assert_eq!(events.len(), 1);
        assert!(events[0].as_ref().unwrap().terminal);
    }

    #[test]
    fn oversized_step_diverges() {
        let cost = QuadraticCost::new(1, 1.0, 0.0).unwrap();
        let res: Result<Vec<_>> = run_reinit_sgd(&cost, cfg(3.5, 1e-9, 1000, 1.0), RandomSource::new(4, 0))
            .unwrap()
            .collect();
        assert!(matches!(res, Err(Error::Diverged { .. })));
    }

    #[test]
    fn invalid_config_rejected() {
        let cost = QuadraticCost::new(1, 1.0, 0.0).unwrap();
        assert!(run_reinit_sgd(&cost, cfg(0.0, 0.1, 1, 1.0), RandomSource::new(0, 0)).is_err());
        assert!(run_reinit_sgd(&cost, cfg(0.1, 0.0, 1, 1.0), RandomSource::new(0, 0)).is_err());
    }

    #[test]
    fn gradient_recovery_examples() {
        let g = gradient_recovery(&[1.0], &[0.9], 0.1).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert_eq!(gradient_recovery(&[0.4], &[0.4], 0.1).unwrap()[0], 0.0);
        assert!(gradient_recovery(&[1.0], &[0.9], 0.0).is_err());
    }

    #[test]
    fn federated_concatenation_marks_restarts() {
        let cost = QuadraticCost::new(1, 1.0, 0.1).unwrap();
        let w1 = collect_events(run_reinit_sgd(&cost, cfg(0.1, 1e-3, 2, 1.0), RandomSource::new(5, 0)).unwrap()).unwrap();
        let w2 = collect_events(run_reinit_sgd(&cost, cfg(0.1, 1e-3, 3, 1.0), RandomSource::new(5, 1)).unwrap()).unwrap();
        assert_eq!((w1.len(), w2.len()), (3, 4));
        let all = federated_sequentialize(vec![w1, w2]).unwrap();
        assert_eq!(all.len(), 7);
        assert!(all[3].reinit);
        assert_eq!(all.iter().filter(|e| e.terminal).count(), 1);
        assert!(all[6].terminal);
        assert!(all.iter().enumerate().all(|(i, e)| e.k == i as u64));
    }

    #[test]
    fn federated_single_worker_is_identity() {
        let cost = QuadraticCost::new(1, 1.0, 0.1).unwrap();
        let w = collect_events(run_reinit_sgd(&cost, cfg(0.1, 1e-3, 5, 1.0), RandomSource::new(6, 0)).unwrap()).unwrap();
        assert_eq!(federated_sequentialize(vec![w.clone()]).unwrap(), w);
        assert!(federated_sequentialize(Vec::new()).is_err());
    }

    #[test]
    fn sgld_never_restarts() {
        let cost = QuadraticCost::new(1, 1.0, 0.1).unwrap();
        let d = ScaledDistribution::gaussian(1, 0.25, 1.0).unwrap();
        let evs = collect_events(run_sgld_forward(&cost, 0.01, 2.0, &d, 500, RandomSource::new(7, 0)).unwrap()).unwrap();
        assert_eq!(evs.len(), 501);
        assert!(evs.iter().all(|e| !e.reinit));
    }

    #[test]
    fn monitor_flags_noiseless_variance() {
        let cost = QuadraticCost::new(1, 1.0, 0.0).unwrap();
        let evs = collect_events(run_reinit_sgd(&cost, cfg(0.1, 0.05, 2000, 1.0), RandomSource::new(8, 0)).unwrap()).unwrap();
        let rep = monitor_assumptions(&evs, 0.05, &MonitorOptions::default()).unwrap();
        assert!(rep.a1_i && rep.a1_iv);
        assert!(!rep.a1_ii, "{rep:?}");
        assert!(rep.min_cond_var_estimate < 1e-20);
    }

    #[test]
    fn monitor_passes_noisy_run() {
        let cost = QuadraticCost::new(1, 1.0, 0.1).unwrap();
        let evs = collect_events(run_reinit_sgd(&cost, cfg(0.1, 0.05, 2000, 1.0), RandomSource::new(9, 0)).unwrap()).unwrap();
        let rep = monitor_assumptions(&evs, 0.05, &MonitorOptions::default()).unwrap();
        assert!(rep.a1_i && rep.a1_ii && rep.a1_iv, "{rep:?}");
        assert!((rep.min_cond_var_estimate - 0.01).abs() < 0.01);
    }

    #[test]
    fn monitor_requires_events() {
        assert!(monitor_assumptions(&[], 0.1, &MonitorOptions::default()).is_err());
    }
}
