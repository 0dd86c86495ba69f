//! Experiment configuration: a sectioned TOML document.
//!
//! Every section has defaults except `[cost]`, whose `kind` selects the
//! landscape. Unknown keys are rejected. [`ExperimentConfig::parse`] applies
//! defaults and fills dimension-dependent fields, so
//! `parse(to_toml(parse(x))) == parse(x)`.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Configuration errors; each names the offending field.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("config field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("feasibility violated: {}", .0.join("; "))]
    Infeasible(Vec<String>),
}

pub(crate) fn field_err(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.to_string(), reason: reason.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run: RunSpec,
    pub cost: CostSpec,
    #[serde(default)]
    pub base: BaseSpec,
    #[serde(default)]
    pub forward: ForwardSpec,
    #[serde(default)]
    pub psgld: PsgldSpec,
    #[serde(default)]
    pub reconstruct: ReconstructSpec,
    #[serde(default)]
    pub theory: TheorySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub sampling: SamplingMode,
    #[serde(default = "yes")]
    pub enforce_a8: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec { seed: default_seed(), out_dir: default_out_dir(), sampling: SamplingMode::default(), enforce_a8: true }
    }
}

/// How sampler streams obtain forward events.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// One forward stream shared by all sampler streams in order.
    #[default]
    Sequential,
    /// A fresh forward stream per sampler stream; runs in parallel.
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Quadratic {
        #[serde(default = "one_usize")]
        dim: usize,
        #[serde(default = "one")]
        curvature: f64,
        #[serde(default = "default_noise")]
        noise_std: f64,
        #[serde(default = "two")]
        box_half_width: f64,
    },
    DoubleWell {
        #[serde(default = "one_usize")]
        dim: usize,
        #[serde(default = "one")]
        height: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "default_noise")]
        noise_std: f64,
    },
    Mdp {
        file: PathBuf,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default)]
        regularizer: RegularizerSpec,
        #[serde(default = "default_horizon")]
        horizon: usize,
    },
    Bayes {
        prior_mean: Vec<f64>,
        #[serde(default = "one")]
        prior_var: f64,
        #[serde(default = "one")]
        obs_var: f64,
        observations: Vec<Vec<f64>>,
        #[serde(default)]
        shift: f64,
        #[serde(default = "one_usize")]
        batch: usize,
        constants: ConstantsSpec,
    },
    Erm {
        samples: Vec<Vec<f64>>,
        #[serde(default)]
        reg: f64,
        #[serde(default = "one_usize")]
        batch: usize,
        constants: ConstantsSpec,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerSpec {
    #[default]
    L2,
    Entropy,
}

/// Structural constants supplied by hand for data-driven costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    pub l_j: f64,
    pub l_grad_j: f64,
    pub m: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b_grad: f64,
    #[serde(default)]
    pub zeta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    #[serde(default = "default_variance")]
    pub variance: f64,
}

impl Default for BaseSpec {
    fn default() -> Self {
        BaseSpec { variance: default_variance() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardKind {
    #[default]
    Sgd,
    Sgld,
    Reinforce,
    Federated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardSpec {
    #[serde(default)]
    pub kind: ForwardKind,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_c_opt")]
    pub c_opt: f64,
    /// Restart scale; defaults to the sampler's `gamma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Unbounded when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<u64>,
    #[serde(default = "one_usize")]
    pub workers: usize,
    /// Inverse temperature of an SGLD forward learner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for ForwardSpec {
    fn default() -> Self {
        ForwardSpec {
            kind: ForwardKind::Sgd,
            eta: default_eta(),
            c_opt: default_c_opt(),
            gamma: None,
            max_iters: None,
            workers: 1,
            beta: None,
        }
    }
}

/// Sampler parameters: a target accuracy `delta`, explicit values, or both.
///
/// With `delta` set, absent explicit fields come from the schedule. Without
/// it, absent fields take the desk-scale defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsgldSpec {
    #[serde(default = "two")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_hat: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl Default for PsgldSpec {
    fn default() -> Self {
        PsgldSpec { beta: 2.0, delta: None, epsilon: None, k_hat: None, kernel_scale: None, gamma: None }
    }
}

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_K_HAT: u64 = 2000;
pub const DEFAULT_KERNEL_SCALE: f64 = 0.3;
pub const DEFAULT_GAMMA: f64 = 0.3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignSpec {
    #[default]
    Min,
    ModeMatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSpec {
    #[serde(default = "default_streams")]
    pub t_streams: usize,
    /// Lower corner of `Theta'`; `[-2, ..]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hi: Option<Vec<f64>>,
    /// `Theta` is `Theta'` grown by this margin.
    #[serde(default)]
    pub margin: f64,
    #[serde(default)]
    pub rho: f64,
    /// Mass of the target inside `Theta'`, used for the coupling bound.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// `T^{-1/4}` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_t: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default)]
    pub align: AlignSpec,
}

impl Default for ReconstructSpec {
    fn default() -> Self {
        ReconstructSpec {
            t_streams: default_streams(),
            theta_lo: None,
            theta_hi: None,
            margin: 0.0,
            rho: 0.0,
            alpha: default_alpha(),
            b_t: None,
            grid_points: default_grid(),
            align: AlignSpec::Min,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    /// Lower bound on the gradient-noise variance; `zeta` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_sgd_hat: Option<f64>,
    #[serde(default = "one")]
    pub c_universal: f64,
    #[serde(default = "one")]
    pub tail_radius: f64,
    /// Deviation level of the reconstruction bound.
    #[serde(default = "one")]
    pub x: f64,
    #[serde(default = "one")]
    pub y: f64,
}

impl Default for TheorySpec {
    fn default() -> Self {
        TheorySpec { mu_sgd_hat: None, c_universal: 1.0, tail_radius: 1.0, x: 1.0, y: 1.0 }
    }
}

fn default_seed() -> u64 {
    1
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn default_noise() -> f64 {
    0.1
}
fn default_lambda() -> f64 {
    0.1
}
fn default_horizon() -> usize {
    30
}
fn default_variance() -> f64 {
    0.25
}
fn default_eta() -> f64 {
    0.1
}
fn default_c_opt() -> f64 {
    0.05
}
fn default_streams() -> usize {
    2000
}
fn default_alpha() -> f64 {
    0.9
}
fn default_grid() -> usize {
    201
}

/// Document used when no `--config` is given.
pub const DEFAULT_DOCUMENT: &str = "[cost]\nkind = \"quadratic\"\n";

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub delta: Option<f64>,
}

impl ExperimentConfig {
    /// Parses, applies defaults and checks field ranges.
    ///
    /// Relative paths inside the document resolve against `base_dir`.
    pub fn parse_in(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        if let CostSpec::Mdp { file, .. } = &mut cfg.cost {
            let joined = base_dir.join(&*file);
            *file = joined.canonicalize().map_err(|e| field_err("cost.file", format!("{}: {e}", joined.display())))?;
        }
        cfg.resolve()?;
        cfg.check_fields()?;
        Ok(cfg)
    }

    /// As [`ExperimentConfig::parse_in`] with paths relative to the working directory.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_in(text, Path::new(""))
    }

    /// Reads and parses a file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| field_err("--config", format!("{}: {e}", path.display())))?;
        Self::parse_in(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Loads `path` (or [`DEFAULT_DOCUMENT`]) with command-line overrides
    /// applied to the document before validation.
    pub fn load_with(path: Option<&Path>, ov: &Overrides) -> Result<Self, ConfigError> {
        let (text, base) = match path {
            Some(p) => (
                std::fs::read_to_string(p).map_err(|e| field_err("--config", format!("{}: {e}", p.display())))?,
                p.parent().unwrap_or(Path::new("")),
            ),
            None => (DEFAULT_DOCUMENT.to_string(), Path::new("")),
        };
        let mut doc: toml::Table = toml::from_str(&text)?;
        let mut set = |section: &str, key: &str, v: toml::Value| {
            let t = doc.entry(section).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            if let toml::Value::Table(t) = t {
                t.insert(key.to_string(), v);
            }
        };
        if let Some(seed) = ov.seed {
            let seed = i64::try_from(seed).map_err(|_| field_err("--seed", "must fit in a signed 64-bit integer"))?;
            set("run", "seed", toml::Value::Integer(seed));
        }
        if let Some(d) = ov.delta {
            set("psgld", "delta", toml::Value::Float(d));
        }
        let text = toml::to_string(&doc).expect("table serializes");
        Self::parse_in(&text, base)
    }

    /// Canonical TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parameter dimension.
    ///
    /// For an MDP cost the file is not read here; the dimension comes from the
    /// box when given, else 1 until the cost is built.
    pub fn dim(&self) -> usize {
        match &self.cost {
            CostSpec::Quadratic { dim, .. } | CostSpec::DoubleWell { dim, .. } => *dim,
            CostSpec::Bayes { prior_mean, .. } => prior_mean.len(),
            CostSpec::Erm { samples, .. } => samples.first().map_or(0, Vec::len),
            CostSpec::Mdp { .. } => self.reconstruct.theta_lo.as_ref().map_or(1, Vec::len),
        }
    }

    fn resolve(&mut self) -> Result<(), ConfigError> {
        if self.psgld.delta.is_none() {
            let p = &mut self.psgld;
            p.epsilon.get_or_insert(DEFAULT_EPSILON);
            p.k_hat.get_or_insert(DEFAULT_K_HAT);
            p.kernel_scale.get_or_insert(DEFAULT_KERNEL_SCALE);
            p.gamma.get_or_insert(DEFAULT_GAMMA);
        }
        let mdp_dim = match &self.cost {
            CostSpec::Mdp { file, .. } => Some(crate::mdp_file::load(file)?.n_params()),
            _ => None,
        };
        let n = mdp_dim.unwrap_or_else(|| self.dim());
        let hi = match &self.cost {
            CostSpec::Mdp { .. } => core::f64::consts::PI,
            _ => 2.0,
        };
        let lo = if mdp_dim.is_some() { 0.0 } else { -hi };
        self.reconstruct.theta_lo.get_or_insert_with(|| vec![lo; n]);
        self.reconstruct.theta_hi.get_or_insert_with(|| vec![hi; n]);
        Ok(())
    }

    fn check_fields(&self) -> Result<(), ConfigError> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field_err(name, format!("must be positive and finite, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field_err(name, format!("must be nonnegative and finite, got {v}")))
            }
        };
        let n = self.dim();
        if n == 0 {
            return Err(field_err("cost.dim", "must be at least 1"));
        }
        match &self.cost {
            CostSpec::Quadratic { curvature, noise_std, box_half_width, .. } => {
                pos("cost.curvature", *curvature)?;
                nonneg("cost.noise_std", *noise_std)?;
                pos("cost.box_half_width", *box_half_width)?;
            }
            CostSpec::DoubleWell { height, width, noise_std, .. } => {
                nonneg("cost.height", *height)?;
                pos("cost.width", *width)?;
                nonneg("cost.noise_std", *noise_std)?;
            }
            CostSpec::Mdp { lambda, horizon, .. } => {
                nonneg("cost.lambda", *lambda)?;
                if *horizon == 0 {
                    return Err(field_err("cost.horizon", "must be at least 1"));
                }
            }
            CostSpec::Bayes { prior_var, obs_var, observations, batch, .. } => {
                pos("cost.prior_var", *prior_var)?;
                pos("cost.obs_var", *obs_var)?;
                if observations.iter().any(|o| o.len() != n) {
                    return Err(field_err("cost.observations", format!("every row must have length {n}")));
                }
                if *batch == 0 {
                    return Err(field_err("cost.batch", "must be at least 1"));
                }
            }
            CostSpec::Erm { samples, reg, batch, .. } => {
                if samples.is_empty() {
                    return Err(field_err("cost.samples", "must not be empty"));
                }
                if samples.iter().any(|s| s.len() != n) {
                    return Err(field_err("cost.samples", format!("every row must have length {n}")));
                }
                nonneg("cost.reg", *reg)?;
                if *batch == 0 {
                    return Err(field_err("cost.batch", "must be at least 1"));
                }
            }
        }
        let v = self.base.variance;
        if !(v > 0.0 && v < 0.5) {
            return Err(field_err("base.variance", format!("must lie in (0, 0.5), got {v}")));
        }
        let f = &self.forward;
        pos("forward.eta", f.eta)?;
        pos("forward.c_opt", f.c_opt)?;
        if let Some(g) = f.gamma {
            pos("forward.gamma", g)?;
        }
        if f.workers == 0 {
            return Err(field_err("forward.workers", "must be at least 1"));
        }
        match f.kind {
            ForwardKind::Sgld => pos("forward.beta", f.beta.ok_or_else(|| field_err("forward.beta", "required for sgld"))?)?,
            ForwardKind::Federated if f.max_iters.is_none() => {
                return Err(field_err("forward.max_iters", "required for federated workers"))
            }
            ForwardKind::Reinforce if !matches!(self.cost, CostSpec::Mdp { .. }) => {
                return Err(field_err("forward.kind", "reinforce needs cost kind `mdp`"))
            }
            _ => {}
        }
        let p = &self.psgld;
        pos("psgld.beta", p.beta)?;
        if let Some(d) = p.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(field_err("psgld.delta", format!("must lie in (0, 1), got {d}")));
            }
        }
        for (name, v) in [("psgld.epsilon", p.epsilon), ("psgld.kernel_scale", p.kernel_scale), ("psgld.gamma", p.gamma)] {
            if let Some(v) = v {
                pos(name, v)?;
            }
        }
        let r = &self.reconstruct;
        if r.t_streams == 0 {
            return Err(field_err("reconstruct.t_streams", "must be at least 1"));
        }
        let (lo, hi) = (r.theta_lo.as_deref().unwrap_or(&[]), r.theta_hi.as_deref().unwrap_or(&[]));
        if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(field_err("reconstruct.theta_lo", "box corners must have equal length with lo < hi"));
        }
        nonneg("reconstruct.margin", r.margin)?;
        nonneg("reconstruct.rho", r.rho)?;
        if !(r.alpha > 0.0 && r.alpha <= 1.0) {
            return Err(field_err("reconstruct.alpha", format!("must lie in (0, 1], got {}", r.alpha)));
        }
        if let Some(b) = r.b_t {
            pos("reconstruct.b_t", b)?;
        }
        if r.grid_points < 2 {
            return Err(field_err("reconstruct.grid_points", "must be at least 2"));
        }
        let t = &self.theory;
        if let Some(mu) = t.mu_sgd_hat {
            pos("theory.mu_sgd_hat", mu)?;
        }
        pos("theory.c_universal", t.c_universal)?;
        pos("theory.tail_radius", t.tail_radius)?;
        pos("theory.x", t.x)?;
        pos("theory.y", t.y)?;
        Ok(())
    }
}
