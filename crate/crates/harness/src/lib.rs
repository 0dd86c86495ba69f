//! Config-driven experiment harness for the passive-SGLD inverse learner.
//!
//! The `psgld-irl` binary is a thin wrapper over [`cli`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod io;
pub mod mdp_file;
pub mod setup;
pub mod commands;
pub mod experiments;

#[cfg(test)]
mod tests;
