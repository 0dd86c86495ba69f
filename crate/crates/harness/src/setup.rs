//! Turns a parsed configuration into cost, forward streams, sampler and
//! reconstruction objects.

use crate::config::{field_err, AlignSpec, ConfigError, CostSpec, ExperimentConfig, ForwardKind, RegularizerSpec, SamplingMode};
use crate::mdp_file;
use psgld_irl_core::cost::{
    bayes_cost, erm_cost, DoubleWellCost, GaussianLikelihood, GaussianLogPrior, LogDensityTerm, QuadraticCost, SquaredLoss,
};
use psgld_irl_core::forward::{federated_sequentialize, run_reinit_sgd, run_sgld_forward, SgdConfig};
use psgld_irl_core::inverse::{check_a8, A8Report, PsgldConfig};
use psgld_irl_core::mdp::{MdpCost, Regularizer};
use psgld_irl_core::metrics::GridFunction;
use psgld_irl_core::reconstruct::{
    alignment_normalize, bandwidth_schedule, construct_domains, cost_from_density, default_floor, kde_estimate,
    run_sequential_sampling, sample_one_stream, AlignMode, AlignedCosts, CostEstimate, Domains, GridSpec,
    ReconstructConfig, SampleSet, SamplingOutcome,
};
use psgld_irl_core::theory::{compute_log_sobolev, delta_max, schedule_from_delta, AlgorithmInput, Schedule, StructuralConstants};
use psgld_irl_core::{
    BoxDomain, CostModel, Error as CoreError, GaussianKernel, GradientEvent, ParamVector, RandomSource, ScaledDistribution,
    SmoothingKernel, StructuralInput,
};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// A forward event stream borrowing the cost.
pub type EventStream<'a> = Box<dyn Iterator<Item = Result<GradientEvent, CoreError>> + Send + 'a>;

/// Where the sampler parameters came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    Explicit,
    Schedule,
    ScheduleWithOverrides,
}

/// Resolved sampler parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplerParams {
    pub mode: ParamMode,
    pub beta: f64,
    pub epsilon: f64,
    pub k_hat: u64,
    pub kernel_scale: f64,
    pub gamma: f64,
}

/// Random-stream layout under one master seed.
pub mod streams {
    use psgld_irl_core::RandomSource;

    /// The shared forward learner.
    pub fn forward(seed: u64) -> RandomSource {
        RandomSource::new(seed, 0)
    }
    /// Sampler stream `i`.
    pub fn sampler(seed: u64, i: usize) -> RandomSource {
        RandomSource::new(seed, 1).child(i as u64)
    }
    /// Forward learner owned by sampler stream `i` in independent mode.
    pub fn independent_forward(seed: u64, i: usize) -> RandomSource {
        RandomSource::new(seed, 2).child(i as u64)
    }
    /// Draws from reference distributions.
    pub fn reference(seed: u64) -> RandomSource {
        RandomSource::new(seed, 3)
    }
}

/// Everything a run needs.
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub cost: Box<dyn CostModel>,
    pub structural: StructuralInput,
    pub projection: Option<BoxDomain>,
    pub params: SamplerParams,
    pub schedule: Option<Schedule>,
    pub c_ls: Option<f64>,
    pub a8: A8Report,
    pub domains: Option<Domains>,
    pub theta: BoxDomain,
    pub kernel: Arc<dyn SmoothingKernel>,
}

fn core_err(field: &str) -> impl Fn(CoreError) -> ConfigError + '_ {
    move |e| field_err(field, e.to_string())
}

/// Builds the cost and its projection box.
pub fn build_cost(cfg: &ExperimentConfig) -> Result<(Box<dyn CostModel>, Option<BoxDomain>), ConfigError> {
    let c = |e: CoreError| field_err("cost", e.to_string());
    Ok(match &cfg.cost {
        CostSpec::Quadratic { dim, curvature, noise_std, box_half_width } => {
            (Box::new(QuadraticCost::new(*dim, *curvature, *noise_std).map_err(c)?.with_box_half_width(*box_half_width)), None)
        }
        CostSpec::DoubleWell { dim, height, width, noise_std } => {
            (Box::new(DoubleWellCost::new(*dim, *height, *width, *noise_std).map_err(c)?), None)
        }
        CostSpec::Mdp { file, lambda, regularizer, horizon } => {
            let mdp = mdp_file::load(file)?;
            let reg = match regularizer {
                RegularizerSpec::L2 => Regularizer::L2,
                RegularizerSpec::Entropy => Regularizer::NegEntropy,
            };
            let proj = (cfg.forward.kind == ForwardKind::Reinforce).then(|| mdp.angle_box());
            (Box::new(MdpCost::new(mdp, *lambda, reg, *horizon).map_err(c)?), proj)
        }
        CostSpec::Bayes { prior_mean, prior_var, obs_var, observations, shift, batch, constants } => {
            let likes = observations
                .iter()
                .map(|x| Box::new(GaussianLikelihood { x: x.clone(), var: *obs_var }) as Box<dyn LogDensityTerm>)
                .collect();
            let sc = structural(constants, prior_mean.len());
            let prior = Box::new(GaussianLogPrior { mean: prior_mean.clone(), var: *prior_var });
            (Box::new(bayes_cost(prior, likes, *shift, sc).with_batch_size(*batch).map_err(c)?), None)
        }
        CostSpec::Erm { samples, reg, batch, constants } => {
            let sc = structural(constants, samples[0].len());
            let cost = erm_cost(samples.clone(), Box::new(SquaredLoss), *reg, sc).map_err(c)?;
            (Box::new(cost.with_batch_size(*batch).map_err(c)?), None)
        }
    })
}

fn structural(c: &crate::config::ConstantsSpec, dim: usize) -> StructuralInput {
    StructuralInput { l_j: c.l_j, l_grad_j: c.l_grad_j, m: c.m, b: c.b, a: c.a, b_grad: c.b_grad, zeta: c.zeta, dim }
}

impl Setup {
    /// Resolves parameters and checks feasibility when the run section asks for it.
    pub fn new(cfg: ExperimentConfig) -> Result<Self, ConfigError> {
        let setup = Self::resolve(cfg)?;
        if setup.cfg.run.enforce_a8 && !setup.a8.feasible() {
            return Err(ConfigError::Infeasible(setup.a8.violations()));
        }
        Ok(setup)
    }

    /// Resolves parameters without the feasibility gate.
    pub fn resolve(cfg: ExperimentConfig) -> Result<Self, ConfigError> {
        let (cost, projection) = build_cost(&cfg)?;
        let structural = cost.constants();
        let n = structural.dim;
        let kernel: Arc<dyn SmoothingKernel> = Arc::new(GaussianKernel::new(n).map_err(core_err("cost.dim"))?);
        let p = &cfg.psgld;
        let (params, schedule, c_ls) = match p.delta {
            None => (
                SamplerParams {
                    mode: ParamMode::Explicit,
                    beta: p.beta,
                    epsilon: p.epsilon.expect("resolved"),
                    k_hat: p.k_hat.expect("resolved"),
                    kernel_scale: p.kernel_scale.expect("resolved"),
                    gamma: p.gamma.expect("resolved"),
                },
                None,
                None,
            ),
            Some(delta) => {
                let r = delta / -delta.ln();
                let eps0 = (r * r).min(1.0);
                let gamma = p.gamma.unwrap_or(eps0.powf(1.5));
                let sc = structural_constants(&cfg, &structural, eps0, gamma)?;
                let ls = compute_log_sobolev(&sc).map_err(core_err("psgld.delta"))?;
                let dmax = delta_max(p.beta, ls.c_ls);
                if delta > dmax {
                    return Err(field_err(
                        "psgld.delta",
                        format!("must lie in (0, exp(-1/(beta c_LS))] = (0, {dmax:.6e}] with c_LS = {:.6e}, got {delta}", ls.c_ls),
                    ));
                }
                let s = schedule_from_delta(delta, p.beta, ls.c_ls, kernel.as_ref()).map_err(core_err("psgld.delta"))?;
                let overridden = p.epsilon.is_some() || p.k_hat.is_some() || p.kernel_scale.is_some() || p.gamma.is_some();
                (
                    SamplerParams {
                        mode: if overridden { ParamMode::ScheduleWithOverrides } else { ParamMode::Schedule },
                        beta: p.beta,
                        epsilon: p.epsilon.unwrap_or(s.epsilon),
                        k_hat: p.k_hat.unwrap_or(s.k),
                        kernel_scale: p.kernel_scale.unwrap_or(s.kernel_delta),
                        gamma: p.gamma.unwrap_or(s.gamma),
                    },
                    Some(s),
                    Some(ls.c_ls),
                )
            }
        };
        let eta = Some(cfg.forward.eta);
        let a8 = check_a8(eta, params.epsilon, params.beta, &structural);
        let r = &cfg.reconstruct;
        let theta_prime = BoxDomain::new(r.theta_lo.clone().expect("resolved"), r.theta_hi.clone().expect("resolved"))
            .map_err(core_err("reconstruct.theta_lo"))?;
        if theta_prime.dim() != n {
            return Err(field_err("reconstruct.theta_lo", format!("box has dimension {}, cost has {n}", theta_prime.dim())));
        }
        let (domains, theta) = if r.margin > 0.0 {
            let d = construct_domains(&theta_prime, r.margin, r.rho, r.alpha).map_err(core_err("reconstruct.margin"))?;
            let t = d.theta.clone();
            (Some(d), t)
        } else {
            (None, theta_prime)
        };
        Ok(Setup { cfg, cost, structural, projection, params, schedule, c_ls, a8, domains, theta, kernel })
    }

    pub fn dim(&self) -> usize {
        self.structural.dim
    }

    /// Restart scale of the forward learner.
    pub fn forward_gamma(&self) -> f64 {
        self.cfg.forward.gamma.unwrap_or(self.params.gamma)
    }

    pub fn sampling_dist(&self) -> Result<ScaledDistribution, ConfigError> {
        ScaledDistribution::gaussian(self.dim(), self.cfg.base.variance, self.params.gamma).map_err(core_err("psgld.gamma"))
    }

    pub fn sgd_config(&self) -> Result<SgdConfig, ConfigError> {
        let f = &self.cfg.forward;
        Ok(SgdConfig {
            eta: f.eta,
            c_opt: f.c_opt,
            max_iters: f.max_iters.unwrap_or(u64::MAX),
            dist: ScaledDistribution::gaussian(self.dim(), self.cfg.base.variance, self.forward_gamma())
                .map_err(core_err("forward.gamma"))?,
        })
    }

    pub fn psgld_config(&self) -> Result<PsgldConfig, ConfigError> {
        if !(self.params.kernel_scale > 0.0) {
            return Err(field_err(
                "psgld.kernel_scale",
                "the schedule admits only a zero kernel scale for this kernel; set kernel_scale explicitly",
            ));
        }
        let cfg = PsgldConfig {
            epsilon: self.params.epsilon,
            beta: self.params.beta,
            delta: self.params.kernel_scale,
            dist: self.sampling_dist()?,
            kernel: self.kernel.clone(),
        };
        cfg.validate().map_err(core_err("psgld"))?;
        Ok(cfg)
    }

    /// A forward event stream drawing from `rng`.
    pub fn forward(&self, rng: RandomSource) -> Result<EventStream<'_>, ConfigError> {
        let f = &self.cfg.forward;
        let cost: &dyn CostModel = self.cost.as_ref();
        let err = core_err("forward");
        Ok(match f.kind {
            ForwardKind::Sgd | ForwardKind::Reinforce => {
                let mut it = run_reinit_sgd(cost, self.sgd_config()?, rng).map_err(&err)?;
                if let Some(b) = &self.projection {
                    it = it.with_projection(b.clone());
                }
                Box::new(it)
            }
            ForwardKind::Sgld => {
                let dist = self.sgd_config()?.dist;
                let beta = f.beta.expect("validated");
                Box::new(run_sgld_forward(cost, f.eta, beta, &dist, f.max_iters.unwrap_or(u64::MAX), rng).map_err(&err)?)
            }
            ForwardKind::Federated => {
                let sgd = self.sgd_config()?;
                let workers = (0..f.workers)
                    .map(|w| run_reinit_sgd(cost, sgd.clone(), rng.child(w as u64)).map_err(&err)?.collect::<Result<Vec<_>, _>>().map_err(&err))
                    .collect::<Result<Vec<_>, _>>()?;
                Box::new(federated_sequentialize(workers).map_err(&err)?.into_iter().map(Ok))
            }
        })
    }

    pub fn b_t(&self) -> Result<f64, ConfigError> {
        match self.cfg.reconstruct.b_t {
            Some(b) => Ok(b),
            None => bandwidth_schedule(self.cfg.reconstruct.t_streams).map_err(core_err("reconstruct.t_streams")),
        }
    }

    pub fn reconstruct_config(&self) -> Result<ReconstructConfig, ConfigError> {
        let r = &self.cfg.reconstruct;
        Ok(ReconstructConfig {
            rho: r.rho,
            t_streams: r.t_streams,
            theta_box: self.theta.clone(),
            kde_kernel: self.kernel.clone(),
            b_t: self.b_t()?,
            k_hat: self.params.k_hat,
            psgld: self.psgld_config()?,
        })
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { domain: self.theta.clone(), points_per_axis: self.cfg.reconstruct.grid_points }
    }

    /// The reference cost tabulated on the reconstruction grid.
    pub fn reference_grid(&self) -> GridFunction {
        GridFunction::from_fn(self.grid().axes(), |x| self.cost.value(x))
    }
}

/// Structural constants at the configured algorithm inputs.
pub fn structural_constants(
    cfg: &ExperimentConfig,
    input: &StructuralInput,
    epsilon: f64,
    gamma: f64,
) -> Result<StructuralConstants, ConfigError> {
    let mu = match cfg.theory.mu_sgd_hat {
        Some(mu) => mu,
        None if input.zeta > 0.0 => input.zeta,
        None => return Err(field_err("theory.mu_sgd_hat", "required when the cost has no gradient noise")),
    };
    let mut alg = AlgorithmInput::new(cfg.forward.c_opt, mu, cfg.psgld.beta, epsilon, gamma);
    alg.c_universal = cfg.theory.c_universal;
    alg.tail_radius = cfg.theory.tail_radius;
    StructuralConstants::gaussian(input.clone(), &alg, cfg.base.variance).map_err(core_err("theory"))
}

/// Samples plus the downstream density and cost estimates.
pub struct Reconstruction {
    pub outcome: SamplingOutcome,
    pub b_t: f64,
    pub estimate: CostEstimate,
    pub aligned: AlignedCosts,
    pub l1_error: f64,
}

/// Runs the sampler streams with the configured mode.
pub fn sample(setup: &Setup, seed: u64) -> anyhow::Result<SamplingOutcome> {
    let rc = setup.reconstruct_config()?;
    match setup.cfg.run.sampling {
        SamplingMode::Sequential => {
            Ok(run_sequential_sampling(setup.forward(streams::forward(seed))?, &rc, |i| streams::sampler(seed, i))?)
        }
        SamplingMode::Independent => {
            rc.validate()?;
            let results: Vec<(ParamVector, bool)> = (0..rc.t_streams)
                .into_par_iter()
                .map(|i| -> anyhow::Result<(ParamVector, bool)> {
                    let fwd = setup.forward(streams::independent_forward(seed, i))?;
                    sample_one_stream(fwd, &rc, streams::sampler(seed, i)).map_err(|e| match e {
                        CoreError::ForwardExhausted { consumed, .. } => CoreError::ForwardExhausted { consumed, completed: i }.into(),
                        other => other.into(),
                    })
                })
                .collect::<anyhow::Result<_>>()?;
            let samples = results.into_iter().filter_map(|(a, inside)| inside.then_some(a)).collect();
            Ok(SamplingOutcome {
                samples: SampleSet { samples, t_attempted: rc.t_streams, domain: rc.theta_box.clone() },
                consumed_events: rc.k_hat * rc.t_streams as u64,
                discarded_events: 0,
            })
        }
    }
}

/// Kernel density and cost estimate from a sample set.
pub fn estimate(setup: &Setup, outcome: SamplingOutcome) -> anyhow::Result<Reconstruction> {
    let b_t = setup.b_t()?;
    let t = setup.cfg.reconstruct.t_streams;
    let kde = kde_estimate(&outcome.samples, b_t, t, setup.kernel.clone())?;
    let density = kde.on_grid(&setup.grid());
    let reference = setup.reference_grid();
    let j_max = reference.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = default_floor(setup.params.beta, j_max);
    let estimate = cost_from_density(&density, setup.params.beta, floor, kde.b_s())?;
    let mode = match setup.cfg.reconstruct.align {
        AlignSpec::Min => AlignMode::Min,
        AlignSpec::ModeMatch => AlignMode::ModeMatch,
    };
    let aligned = alignment_normalize(&estimate, setup.cost.as_ref(), mode)?;
    let l1_error = aligned.l1_error()?;
    Ok(Reconstruction { outcome, b_t, estimate, aligned, l1_error })
}

/// Sampling followed by estimation.
pub fn reconstruct(setup: &Setup, seed: u64) -> anyhow::Result<Reconstruction> {
    estimate(setup, sample(setup, seed)?)
}
