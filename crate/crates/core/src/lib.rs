//! Passive stochastic gradient Langevin dynamics (PSGLD) for adaptive inverse
//! reinforcement learning.
//!
//! A forward learner runs re-initializing stochastic gradient descent on an
//! unknown cost `J` and leaks its iterates and noisy gradients. An observer
//! feeds that stream through a kernel-weighted Langevin recursion whose
//! stationary law is the Gibbs measure `exp(-beta J)`. Repeating the recursion
//! over many streams yields samples from which `J` is reconstructed up to an
//! additive constant.
//!
//! The crate is `no_std` with `alloc`. IO, configuration and the command line
//! live in the companion `psgld-irl` crate.
//!
//! Module map:
//!
//! * [`param`], [`rng`], [`dist`], [`kernel`], [`cost`]: shared primitives
//! * [`forward`]: forward learners and event streams
//! * [`mdp`]: tabular MDP with trigonometric policies and REINFORCE
//! * [`inverse`]: the passive Langevin sampler
//! * [`reconstruct`]: multi-stream sampling, density estimate and cost estimate
//! * [`theory`]: bound constants, log-Sobolev constant and schedules
//! * [`metrics`]: Wasserstein distances, grid errors and moments

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![forbid(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;

pub mod cost;
pub mod dist;
pub mod error;
pub mod forward;
pub mod inverse;
pub mod kernel;
pub mod mdp;
pub mod metrics;
pub mod numeric;
pub mod param;
pub mod reconstruct;
pub mod rng;
pub mod theory;

pub use cost::{CostModel, StructuralInput};
pub use dist::{BaseDistribution, GaussianBase, ScaledDistribution};
pub use error::{Error, Result};
pub use forward::GradientEvent;
pub use kernel::{GaussianKernel, SmoothingKernel};
pub use param::{BoxDomain, ParamVector};
pub use rng::RandomSource;
