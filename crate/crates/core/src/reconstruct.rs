//! Multi-stream sampling, kernel density estimate and cost reconstruction.
//!
//! `T` sampler streams each run for `k_hat` steps on the forward events.
//! Final iterates that land in the box `Theta` form the sample set `S`. The
//! density estimate uses the bandwidth `b_S = b_T sqrt(T / |S|)` and the cost
//! estimate is `-(1/beta) log` of the clamped density.

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::forward::GradientEvent;
use crate::inverse::{psgld_init, psgld_step, PsgldConfig};
use crate::kernel::SmoothingKernel;
use crate::metrics::{l1_grid_error, GridFunction};
use crate::numeric::linspace;
use crate::param::{BoxDomain, ParamVector};
use crate::rng::RandomSource;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::iter::Peekable;

/// Reconstruction parameters.
#[derive(Clone, Debug)]
pub struct ReconstructConfig {
    /// Target Wasserstein proximity.
    pub rho: f64,
    /// Number of sampler streams `T`.
    pub t_streams: usize,
    /// Sample box `Theta`.
    pub theta_box: BoxDomain,
    /// Density-estimation kernel.
    pub kde_kernel: Arc<dyn SmoothingKernel>,
    /// Bandwidth `b_T`.
    pub b_t: f64,
    /// Steps per stream.
    pub k_hat: u64,
    /// Sampler parameters.
    pub psgld: PsgldConfig,
}

impl ReconstructConfig {
    /// Checks `T >= 1`, `b_T > 0` and dimensions.
    pub fn validate(&self) -> Result<()> {
        if self.t_streams == 0 {
            return Err(Error::invalid("T", "need at least one stream"));
        }
        if !(self.b_t > 0.0 && self.b_t.is_finite()) {
            return Err(Error::invalid("b_T", "must be positive"));
        }
        crate::error::check_dim(self.psgld.dim(), self.theta_box.dim())?;
        crate::error::check_dim(self.psgld.dim(), self.kde_kernel.dim())?;
        self.psgld.validate()
    }
}

/// Final iterates that fell inside the box.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    /// Samples inside the box.
    pub samples: Vec<ParamVector>,
    /// Streams run.
    pub t_attempted: usize,
    /// The box.
    pub domain: BoxDomain,
}

impl SampleSet {
    /// `|S| / T`, the empirical box probability.
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.t_attempted.max(1) as f64
    }
}

/// Sampling result with forward-stream bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingOutcome {
    /// The sample set.
    pub samples: SampleSet,
    /// Forward events fed to sampler streams.
    pub consumed_events: u64,
    /// Forward events dropped while waiting for a restart.
    pub discarded_events: u64,
}

fn next_live<I>(forward: &mut Peekable<I>, consumed: u64, completed: usize) -> Result<GradientEvent>
where
    I: Iterator<Item = Result<GradientEvent>>,
{
    match forward.next() {
        Some(Ok(ev)) if !ev.terminal => Ok(ev),
        Some(Err(e)) => Err(e),
        _ => Err(Error::ForwardExhausted { consumed, completed }),
    }
}

/// Runs `T` sampler streams on one forward stream.
///
/// Stream `i` draws its initial point and noise from `rng_for_stream(i)` and
/// consumes `k_hat` events. Before stream `i + 1` starts, events are dropped
/// until the next restart marker.
pub fn run_sequential_sampling<I>(
    forward: I,
    cfg: &ReconstructConfig,
    mut rng_for_stream: impl FnMut(usize) -> RandomSource,
) -> Result<SamplingOutcome>
where
    I: Iterator<Item = Result<GradientEvent>>,
{
    cfg.validate()?;
    let mut forward = forward.peekable();
    let (mut consumed, mut discarded) = (0u64, 0u64);
    let mut samples = Vec::new();
    for i in 0..cfg.t_streams {
        if i > 0 {
            loop {
                match forward.peek() {
                    Some(Ok(ev)) if ev.reinit && !ev.terminal => break,
                    Some(Ok(ev)) if !ev.terminal => {
                        forward.next();
                        discarded += 1;
                    }
                    Some(Err(_)) => return Err(forward.next().and_then(|r| r.err()).unwrap_or(Error::Empty("forward"))),
                    _ => return Err(Error::ForwardExhausted { consumed: consumed + discarded, completed: i }),
                }
            }
        }
        let mut rng = rng_for_stream(i);
        let mut state = psgld_init(&cfg.psgld, &mut rng);
        for _ in 0..cfg.k_hat {
            let ev = next_live(&mut forward, consumed + discarded, i)?;
            consumed += 1;
            state = psgld_step(&state, &ev, &cfg.psgld, &mut rng)?;
        }
        if cfg.theta_box.contains(&state.alpha) {
            samples.push(state.alpha);
        }
    }
    Ok(SamplingOutcome {
        samples: SampleSet { samples, t_attempted: cfg.t_streams, domain: cfg.theta_box.clone() },
        consumed_events: consumed,
        discarded_events: discarded,
    })
}

/// Runs one sampler stream on its own forward stream and returns the final
/// iterate with the in-box flag.
pub fn sample_one_stream<I>(forward: I, cfg: &ReconstructConfig, mut rng: RandomSource) -> Result<(ParamVector, bool)>
where
    I: Iterator<Item = Result<GradientEvent>>,
{
    let mut forward = forward.peekable();
    let mut state = psgld_init(&cfg.psgld, &mut rng);
    for consumed in 0..cfg.k_hat {
        let ev = next_live(&mut forward, consumed, 0)?;
        state = psgld_step(&state, &ev, &cfg.psgld, &mut rng)?;
    }
    let inside = cfg.theta_box.contains(&state.alpha);
    Ok((state.alpha, inside))
}

/// Runs `T` streams, stream `i` on its own forward stream `factory(i)`.
pub fn run_independent_sampling<I, F>(
    mut factory: F,
    cfg: &ReconstructConfig,
    mut rng_for_stream: impl FnMut(usize) -> RandomSource,
) -> Result<SamplingOutcome>
where
    I: Iterator<Item = Result<GradientEvent>>,
    F: FnMut(usize) -> Result<I>,
{
    cfg.validate()?;
    let mut samples = Vec::new();
    for i in 0..cfg.t_streams {
        let (alpha, inside) = sample_one_stream(factory(i)?, cfg, rng_for_stream(i)).map_err(|e| match e {
            Error::ForwardExhausted { consumed, .. } => Error::ForwardExhausted { consumed, completed: i },
            other => other,
        })?;
        if inside {
            samples.push(alpha);
        }
    }
    Ok(SamplingOutcome {
        samples: SampleSet { samples, t_attempted: cfg.t_streams, domain: cfg.theta_box.clone() },
        consumed_events: cfg.k_hat * cfg.t_streams as u64,
        discarded_events: 0,
    })
}

/// `b_T = T^{-1/4}`.
pub fn bandwidth_schedule(t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("T", "must be at least 1"));
    }
    Ok(libm::pow(t as f64, -0.25))
}

/// `b_S = b_T sqrt(T / |S|)`.
pub fn effective_bandwidth(b_t: f64, t: usize, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::Empty("sample set"));
    }
    Ok(b_t * libm::sqrt(t as f64 / s as f64))
}

/// Uniform grid over a box.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    /// Box covered by the grid.
    pub domain: BoxDomain,
    /// Nodes per axis.
    pub points_per_axis: usize,
}

impl GridSpec {
    /// Default resolution.
    pub const DEFAULT_POINTS: usize = 201;

    /// Grid with the default resolution.
    pub fn new(domain: BoxDomain) -> Self {
        GridSpec { domain, points_per_axis: Self::DEFAULT_POINTS }
    }

    /// Node coordinates per axis.
    pub fn axes(&self) -> Vec<Vec<f64>> {
        self.domain
            .lo()
            .iter()
            .zip(self.domain.hi())
            .map(|(a, b)| linspace(*a, *b, self.points_per_axis))
            .collect()
    }
}

/// Kernel density estimate `(1/(|S| b_S)) sum_i K((x - a_i) / b_S^{1/N})`.
#[derive(Clone, Debug)]
pub struct KernelDensity {
    points: Vec<ParamVector>,
    b_s: f64,
    scale: f64,
    kernel: Arc<dyn SmoothingKernel>,
}

/// Builds the density estimate from a sample set.
pub fn kde_estimate(s: &SampleSet, b_t: f64, t: usize, kernel: Arc<dyn SmoothingKernel>) -> Result<KernelDensity> {
    if s.samples.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    if !(b_t > 0.0) {
        return Err(Error::invalid("b_T", "must be positive"));
    }
    crate::error::check_dim(kernel.dim(), s.samples[0].dim())?;
    let b_s = effective_bandwidth(b_t, t, s.samples.len())?;
    let scale = libm::pow(b_s, 1.0 / kernel.dim() as f64);
    Ok(KernelDensity { points: s.samples.clone(), b_s, scale, kernel })
}

impl KernelDensity {
    /// Effective bandwidth `b_S`.
    pub fn b_s(&self) -> f64 {
        self.b_s
    }

    /// Density at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut diff = alloc::vec![0.0; x.len()];
        let mut total = 0.0;
        for p in &self.points {
            for ((d, xi), pi) in diff.iter_mut().zip(x).zip(p.iter()) {
                *d = xi - pi;
            }
            total += self.kernel.eval_scaled(&diff, self.scale);
        }
        total / self.points.len() as f64
    }

    /// Density on a grid.
    pub fn on_grid(&self, grid: &GridSpec) -> GridFunction {
        GridFunction::from_fn(grid.axes(), |x| self.eval(x))
    }
}

/// Density and cost on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CostEstimate {
    /// Clamped density.
    pub density: GridFunction,
    /// `-(1/beta) log density`.
    pub cost: GridFunction,
    /// Inverse temperature.
    pub beta: f64,
    /// Effective bandwidth.
    pub b_s: f64,
    /// Density floor.
    pub floor: f64,
}

/// `exp(-beta J_max)`, the default density floor.
pub fn default_floor(beta: f64, j_max_box: f64) -> f64 {
    libm::exp(-beta * j_max_box)
}

/// `J_hat = -(1/beta) log(max(density, floor))`.
pub fn cost_from_density(density: &GridFunction, beta: f64, floor: f64, b_s: f64) -> Result<CostEstimate> {
    if !(floor > 0.0) {
        return Err(Error::invalid("floor", "must be positive"));
    }
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", "must be positive"));
    }
    let clamped = density.map(|v| v.max(floor));
    let cost = clamped.map(|v| -libm::log(v) / beta);
    if cost.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost estimate"));
    }
    Ok(CostEstimate { density: clamped, cost, beta, b_s, floor })
}

/// Constant removed before comparing costs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignMode {
    /// Subtract each grid's minimum.
    Min,
    /// Subtract each grid's value at the reference minimizer.
    ModeMatch,
}

/// Estimate and reference on the same grid after constant alignment.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedCosts {
    /// Aligned estimate.
    pub estimate: GridFunction,
    /// Aligned reference.
    pub reference: GridFunction,
}

impl AlignedCosts {
    /// `int |J_hat - J|` over the grid.
    pub fn l1_error(&self) -> Result<f64> {
        l1_grid_error(&self.estimate, &self.reference)
    }
}

/// Removes the additive constant from both the estimate and the reference cost.
pub fn alignment_normalize(est: &CostEstimate, reference: &dyn CostModel, mode: AlignMode) -> Result<AlignedCosts> {
    if est.cost.axes.len() != reference.dim() {
        return Err(Error::GridMismatch("reference dimension differs from grid"));
    }
    let r = GridFunction::from_fn(est.cost.axes.clone(), |x| reference.value(x));
    align_grids(&est.cost, &r, mode)
}

/// As [`alignment_normalize`] for an already tabulated reference.
pub fn align_grids(estimate: &GridFunction, reference: &GridFunction, mode: AlignMode) -> Result<AlignedCosts> {
    if estimate.axes != reference.axes {
        return Err(Error::GridMismatch("axes differ"));
    }
    let (ce, cr) = match mode {
        AlignMode::Min => (estimate.min(), reference.min()),
        AlignMode::ModeMatch => {
            let i = reference.argmin();
            (estimate.values[i], reference.values[i])
        }
    };
    Ok(AlignedCosts { estimate: estimate.map(|v| v - ce), reference: reference.map(|v| v - cr) })
}

/// Outer and inner domains with the transport-mass bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Domains {
    /// `Theta'`.
    pub theta_prime: BoxDomain,
    /// `Theta`, `Theta'` grown by the margin.
    pub theta: BoxDomain,
    /// Lower bound on the coupling mass inside `Theta x Theta`.
    pub xi_lower: f64,
}

/// Inflates `Theta'` by `margin` and records the `xi` lower bound.
pub fn construct_domains(theta_prime: &BoxDomain, margin: f64, rho: f64, alpha: f64) -> Result<Domains> {
    let xi_lower = crate::theory::xi_lower_bound(alpha, rho, margin)?;
    Ok(Domains { theta_prime: theta_prime.clone(), theta: theta_prime.inflate(margin)?, xi_lower })
}
