//! Subcommand bodies. Each writes into an [`OutputDir`] and returns a JSON
//! summary.

use crate::io::{cloud_table, events_table, grid_table, read_cloud, read_events, read_grid, trace_table, Format, OutputDir};
use crate::setup::{self, streams, ParamMode, SamplerParams, Setup};
use anyhow::{bail, Context, Result};
use psgld_irl_core::forward::{monitor_assumptions, MonitorOptions};
use psgld_irl_core::inverse::{run_psgld_traced, A8Report};
use psgld_irl_core::metrics::{l1_grid_error, moment_report, w2_1d_exact, w2_sliced, MomentReport, DEFAULT_PROJECTIONS};
use psgld_irl_core::reconstruct::{align_grids, AlignMode};
use psgld_irl_core::theory::{
    beta_x_t, compute_c6, compute_c_constants, compute_kappa0, compute_log_sobolev, compute_m_theta, log_lipschitz,
    reconstruction_bound, reconstruction_x_min, wasserstein_bound, KdeConstants, ReconstructionInput, Schedule,
};
use psgld_irl_core::{GradientEvent, ParamVector};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;
use std::time::Instant;

/// Run metadata written next to the outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub threads: usize,
    pub format: Format,
    pub parameter_mode: Option<ParamMode>,
    pub sampler: Option<SamplerParams>,
    pub schedule: Option<Value>,
    pub a8: Option<Value>,
    pub config: Option<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, format: Format) -> Self {
        RunManifest {
            tool: "psgld-irl",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed,
            threads: rayon::current_num_threads(),
            format,
            parameter_mode: None,
            sampler: None,
            schedule: None,
            a8: None,
            config: None,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn with_setup(mut self, s: &Setup) -> Self {
        self.parameter_mode = Some(s.params.mode);
        self.sampler = Some(s.params.clone());
        self.schedule = s.schedule.as_ref().map(|sch| schedule_json(sch, s.c_ls));
        self.a8 = Some(a8_json(&s.a8));
        self.config = Some(s.cfg.to_toml());
        self
    }
}

pub fn schedule_json(s: &Schedule, c_ls: Option<f64>) -> Value {
    json!({
        "delta": s.delta,
        "epsilon": s.epsilon,
        "k": s.k,
        "kernel_scale": s.kernel_delta,
        "kernel_scale_degenerate": s.kernel_delta_degenerate,
        "gamma": s.gamma,
        "c_ls": c_ls,
    })
}

pub fn a8_json(r: &A8Report) -> Value {
    json!({
        "feasible": r.feasible(),
        "eta_upper": r.eta_upper,
        "eta_ok": r.eta_ok,
        "epsilon_upper": r.epsilon_upper,
        "epsilon_ok": r.epsilon_ok,
        "beta_lower": r.beta_lower,
        "beta_ok": r.beta_ok,
        "violations": r.violations(),
    })
}

pub fn moments_json(m: &MomentReport) -> Value {
    let n = m.mean.len();
    json!({
        "n": m.n,
        "mean": m.mean,
        "variance": (0..n).map(|i| m.variance(i)).collect::<Vec<_>>(),
        "covariance": m.covariance,
        "mean_se": m.mean_se,
        "variance_se": m.variance_se,
    })
}

fn write_config(out: &mut OutputDir, s: &Setup) -> Result<()> {
    out.write_text("config.toml", &s.cfg.to_toml())?;
    Ok(())
}

/// Finishes a run: writes the manifest with timing.
pub fn finish(out: OutputDir, mut manifest: RunManifest, started: Instant) -> Result<()> {
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    out.finish(&manifest)?;
    Ok(())
}

/// Forward events up to the terminal event or `limit` events.
pub fn forward_events(s: &Setup, seed: u64, limit: Option<u64>) -> Result<Vec<GradientEvent>> {
    if limit.is_none() && s.cfg.forward.max_iters.is_none() {
        bail!("forward.max_iters is unbounded; set it or pass --events");
    }
    let mut out = Vec::new();
    for ev in s.forward(streams::forward(seed))? {
        let ev = ev?;
        let stop = ev.terminal;
        out.push(ev);
        if stop || limit.is_some_and(|l| out.len() as u64 >= l) {
            break;
        }
    }
    Ok(out)
}

/// `run-forward`: event CSV plus the assumption monitor.
pub fn run_forward(s: &Setup, seed: u64, limit: Option<u64>, out: &mut OutputDir) -> Result<Value> {
    write_config(out, s)?;
    let events = forward_events(s, seed, limit)?;
    out.write_table("events", &events_table(&events))?;
    let st = &s.structural;
    let kappa0 = compute_kappa0(s.cfg.base.variance, st.dim)?;
    let opts = MonitorOptions { m_theta_bound: Some(compute_m_theta(kappa0, st.m, st.b, st.b_grad)), ..Default::default() };
    let report = match monitor_assumptions(&events, s.cfg.forward.c_opt, &opts) {
        Ok(r) => json!({
            "n_events": r.n_events,
            "min_grad_norm": r.min_grad_norm,
            "min_cond_var_estimate": r.min_cond_var_estimate,
            "max_sq_norm_estimate": r.max_sq_norm_estimate,
            "mean_sq_norm": r.mean_sq_norm,
            "m_theta_bound": opts.m_theta_bound,
            "a1_i": r.a1_i,
            "a1_ii": r.a1_ii,
            "a1_iii": r.a1_iii,
            "a1_iv": r.a1_iv,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let restarts = events.iter().filter(|e| e.reinit).count();
    let summary = json!({ "events": events.len(), "restarts": restarts, "assumptions": report });
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

/// `run-psgld`: one sampler stream on a recorded or live forward stream.
pub fn run_psgld(s: &Setup, seed: u64, events_file: Option<&Path>, out: &mut OutputDir) -> Result<Value> {
    write_config(out, s)?;
    let cfg = s.psgld_config()?;
    let k_hat = s.params.k_hat;
    let stride = (k_hat / 10_000).max(1);
    let mut trace = Vec::new();
    let mut record = |st: &psgld_irl_core::inverse::PsgldState| {
        if st.k % stride == 0 || st.k == k_hat {
            trace.push((st.k, st.alpha.clone()));
        }
    };
    let mut rng = streams::sampler(seed, 0);
    let fin = match events_file {
        Some(p) => {
            let events = read_events(p)?;
            let mut it = events.into_iter().map(Ok);
            run_psgld_traced(&mut it, &cfg, k_hat, &mut rng, &mut record)?
        }
        None => {
            let mut it = s.forward(streams::forward(seed))?;
            run_psgld_traced(&mut it, &cfg, k_hat, &mut rng, &mut record)?
        }
    };
    out.write_table("trace", &trace_table(&trace))?;
    let summary = json!({ "k": fin.k, "alpha": fin.alpha.as_slice(), "trace_stride": stride });
    out.write_json("final.json", &summary)?;
    Ok(summary)
}

/// `reconstruct`: samples, density, cost estimate and summary.
pub fn reconstruct(s: &Setup, seed: u64, out: &mut OutputDir) -> Result<Value> {
    write_config(out, s)?;
    let r = setup::reconstruct(s, seed)?;
    let samples = &r.outcome.samples;
    out.write_table("samples", &cloud_table(&samples.samples))?;
    out.write_table("density", &grid_table(&r.estimate.density))?;
    out.write_table("cost_estimate", &grid_table(&r.aligned.estimate))?;
    out.write_table("cost_reference", &grid_table(&r.aligned.reference))?;
    let moments = moment_report(&samples.samples).map(|m| moments_json(&m)).unwrap_or(Value::Null);
    let summary = json!({
        "t_attempted": samples.t_attempted,
        "accepted": samples.samples.len(),
        "acceptance_rate": samples.acceptance_rate(),
        "consumed_events": r.outcome.consumed_events,
        "discarded_events": r.outcome.discarded_events,
        "b_t": r.b_t,
        "b_s": r.estimate.b_s,
        "floor": r.estimate.floor,
        "l1_error": r.l1_error,
        "xi_lower": s.domains.as_ref().map(|d| d.xi_lower),
        "moments": moments,
    });
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

/// `schedule`: the schedule for the configured `delta`.
pub fn schedule(s: &Setup) -> Result<Value> {
    let sch = s.schedule.as_ref().context("psgld.delta is not set; pass --delta")?;
    Ok(json!({
        "beta": s.params.beta,
        "delta_max": psgld_irl_core::theory::delta_max(s.params.beta, s.c_ls.unwrap_or(f64::NAN)),
        "schedule": schedule_json(sch, s.c_ls),
    }))
}

fn result_json(r: psgld_irl_core::Result<Value>) -> Value {
    r.unwrap_or_else(|e| json!({ "error": e.to_string() }))
}

/// `bounds`: every constant and both bounds at the configured parameters.
pub fn bounds(s: &Setup) -> Result<Value> {
    let p = &s.params;
    let sc = setup::structural_constants(&s.cfg, &s.structural, p.epsilon, p.gamma)?;
    let st = &s.structural;
    let c = compute_c_constants(&sc);
    let ls = compute_log_sobolev(&sc);
    let kc = KdeConstants::new(s.kernel.as_ref(), p.beta, st.l_grad_j, st.l_j);
    let reference = s.reference_grid();
    let t1 = reference.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r = &s.cfg.reconstruct;
    let t = r.t_streams as f64;
    let b_t = s.b_t()?;
    let volume = s.theta.volume();
    let xi = s.domains.as_ref().map_or(r.alpha * r.alpha, |d| d.xi_lower);
    let th = &s.cfg.theory;
    let recon = (|| -> psgld_irl_core::Result<Value> {
        let bx = beta_x_t(th.x, t, b_t, r.alpha, st.dim, &kc)?;
        let c6 = compute_c6(&kc, b_t, bx, p.beta, t1, volume)?;
        let inp = ReconstructionInput {
            x: th.x,
            y: th.y,
            t,
            b_t,
            rho: r.rho,
            xi,
            theta_volume: volume,
            lipschitz: log_lipschitz(p.beta, t1),
            p_theta: r.alpha,
            dim: st.dim,
            c6,
            kde: kc,
        };
        let rb = reconstruction_bound(&inp)?;
        Ok(json!({
            "x": th.x, "y": th.y, "t": t, "b_t": b_t, "rho": r.rho, "xi": xi, "theta_volume": volume,
            "lipschitz": inp.lipschitz, "p_theta": r.alpha, "t1": t1, "beta_x_t": bx, "c6": c6,
            "x_min": reconstruction_x_min(r.rho, c6, xi, volume),
            "phi": rb.phi, "psi": rb.psi, "tail": rb.tail, "vacuous": rb.vacuous,
        }))
    })();
    let w2 = match (&s.schedule, &c, &ls) {
        (Some(sch), Ok(c), Ok(ls)) => result_json(
            wasserstein_bound(sch.delta, c.c3.max(0.0), c.c4, ls.c_ls, st.dim).map(|w| json!({ "delta": sch.delta, "bound": w })),
        ),
        (None, _, _) => Value::Null,
        (_, Err(e), _) | (_, _, Err(e)) => json!({ "error": e.to_string() }),
    };
    Ok(json!({
        "structural": {
            "l_j": st.l_j, "l_grad_j": st.l_grad_j, "m": st.m, "b": st.b, "a": st.a, "b_grad": st.b_grad,
            "zeta": st.zeta, "dim": st.dim,
        },
        "algorithm": {
            "c_opt": sc.c_opt, "mu_sgd_hat": sc.mu_sgd_hat, "beta": sc.beta, "epsilon": sc.epsilon, "gamma": p.gamma,
            "c_universal": sc.c_universal, "tail_radius": sc.tail_radius,
        },
        "derived": {
            "kappa0": sc.kappa0, "m_theta": sc.m_theta, "i": sc.i_const, "i_prime": sc.i_prime,
            "sup_base": sc.sup_base, "sup_scaled": sc.sup_scaled,
        },
        "c": result_json(c.map(|c| json!({
            "c0": c.c0, "c1": c.c1, "c2": c.c2, "c3": c.c3, "c4": c.c4, "c5": c.c5,
        }))),
        "log_sobolev": result_json(ls.map(|l| json!({
            "kappa": l.kappa, "gamma_lyap": l.gamma_lyap, "poincare_inv": l.poincare_inv,
            "ln_poincare_inv": l.ln_poincare_inv, "c_ls": l.c_ls, "ln_c_ls": l.ln_c_ls,
        }))),
        "kde": { "k1": kc.k1, "k2": kc.k2, "k3": kc.k3, "k4": kc.k4 },
        "a8": a8_json(&s.a8),
        "wasserstein": w2,
        "reconstruction": result_json(recon),
    }))
}

/// What `metrics` compares.
pub enum MetricsInput<'a> {
    Clouds(&'a Path, &'a Path),
    Grids(&'a Path, &'a Path),
}

/// `metrics`: distances between two clouds or two grids.
pub fn metrics(input: MetricsInput<'_>, seed: u64) -> Result<Value> {
    match input {
        MetricsInput::Clouds(a, b) => {
            let (ca, cb) = (read_cloud(a)?, read_cloud(b)?);
            let dim = ca.first().map_or(0, ParamVector::dim);
            if cb.first().map_or(0, ParamVector::dim) != dim {
                bail!("clouds have different dimensions");
            }
            let (w2, method) = if dim == 1 {
                let f = |c: &[ParamVector]| c.iter().map(|p| p[0]).collect::<Vec<_>>();
                (w2_1d_exact(&f(&ca), &f(&cb))?, "exact_1d")
            } else {
                (w2_sliced(&ca, &cb, DEFAULT_PROJECTIONS, &mut streams::reference(seed))?, "sliced")
            };
            let m = |c: &[ParamVector]| moment_report(c).map(|m| moments_json(&m)).unwrap_or(Value::Null);
            Ok(json!({ "w2": w2, "method": method, "a": m(&ca), "b": m(&cb) }))
        }
        MetricsInput::Grids(a, b) => {
            let (ga, gb) = (read_grid(a)?, read_grid(b)?);
            let raw = l1_grid_error(&ga, &gb)?;
            let aligned = align_grids(&ga, &gb, AlignMode::Min)?.l1_error()?;
            Ok(json!({ "l1": raw, "l1_min_aligned": aligned }))
        }
    }
}
