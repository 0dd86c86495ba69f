//! Tabular MDP files.
//!
//! ```toml
//! discount = 0.9
//! rho0 = [0.5, 0.5]
//! cost = [[1.0, 0.0], [0.5, 2.0]]          # cost[s][a]
//! transition = [[[0.9, 0.1], [0.2, 0.8]],  # transition[s][a][s']
//!               [[0.5, 0.5], [0.0, 1.0]]]
//! ```

use crate::config::{field_err, ConfigError};
use psgld_irl_core::mdp::TabularMdp;
use serde::Deserialize;
use std::path::Path;

/// The chain MDP shipped with the harness.
pub const CHAIN_2X2: &str = include_str!("../data/mdp_2x2.toml");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    discount: f64,
    rho0: Vec<f64>,
    cost: Vec<Vec<f64>>,
    transition: Vec<Vec<Vec<f64>>>,
}

/// Parses MDP text.
pub fn parse(text: &str) -> Result<TabularMdp, ConfigError> {
    let f: MdpFile = toml::from_str(text)?;
    TabularMdp::new(f.transition, f.cost, f.discount, f.rho0).map_err(|e| field_err("cost.file", e.to_string()))
}

/// Reads an MDP file.
pub fn load(path: &Path) -> Result<TabularMdp, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| field_err("cost.file", format!("{}: {e}", path.display())))?;
    parse(&text)
}

/// The shipped chain MDP.
pub fn chain() -> TabularMdp {
    parse(CHAIN_2X2).expect("shipped MDP is valid")
}
