//! Acceptance criteria 1-8. Each test prints one `PASS`/`FAIL` line to the
//! raw stderr handle so it shows up whether or not output is captured.

use psgld_irl::experiments::{self, CriterionResult, DEFAULT_SEED};
use std::io::Write;

fn check(name: &str) -> CriterionResult {
    let r = experiments::run(name, DEFAULT_SEED).expect("experiment runs");
    let _ = writeln!(std::io::stderr().lock(), "{} ({:.1}s)", r.line(), r.seconds);
    r
}

#[test]
fn criterion_1_quadratic_gibbs() {
    let r = check("quadratic-gibbs");
    assert!(r.passed, "{}", r.summary);
}

#[test]
fn criterion_2_step_size_monotonicity() {
    let r = check("step-size");
    assert!(r.passed, "{}", r.summary);
}

#[test]
fn criterion_3_reconstruction_l1() {
    let r = check("reconstruction-l1");
    assert!(r.passed, "{}", r.summary);
}

#[test]
fn criterion_4_reinforce_unbiased() {
    let r = check("reinforce");
    assert!(r.passed, "{}", r.summary);
}

#[test]
fn criterion_5_formulas() {
    let r = check("formulas");
    assert!(r.passed, "{}", r.summary);
}

#[test]
fn criterion_6_bound_shapes() {
    let r = check("bound-shapes");
    assert!(r.passed, "{}", r.summary);
}

#[test]
fn criterion_7_sampler_contracts() {
    let r = check("sampler");
    assert!(r.passed, "{}", r.summary);
}

#[test]
fn criterion_8_exact_oracles() {
    let r = check("oracles");
    assert!(r.passed, "{}", r.summary);
}
