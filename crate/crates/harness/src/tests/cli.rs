use crate::cli::{run, Cli, Reply};
use clap::Parser;
use serde_json::Value;
use std::path::Path;

const QUAD: &str = "[run]\nenforce_a8 = false\n[cost]\nkind = \"quadratic\"\n[forward]\nmax_iters = 400\n";

fn call(args: &[&str]) -> anyhow::Result<Reply> {
    let cli = Cli::try_parse_from(std::iter::once("psgld-irl").chain(args.iter().copied()))?;
    run(&cli)
}

fn json(args: &[&str]) -> Value {
    match call(args).unwrap() {
        Reply::Json(v) => v,
        Reply::Line(s) => panic!("expected json, got {s}"),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &Path, rel: &str) -> String {
    dir.join(rel).to_str().unwrap().to_string()
}

#[test]
fn schedule_at_delta_tenth() {
    let v = json(&["schedule", "--delta", "0.1"]);
    let eps = v["schedule"]["epsilon"].as_f64().unwrap();
    let line = (0.1f64 / 10f64.ln()).powi(2);
    assert!((eps - line).abs() <= 1e-14 * line, "{eps} vs {line}");
    assert!((eps * 1e7).round() / 1e7 <= 0.0018861);
    assert_eq!(v["schedule"]["kernel_scale_degenerate"], true);
}

#[test]
fn schedule_without_delta_names_it() {
    let err = call(&["schedule"]).unwrap_err();
    assert!(format!("{err:#}").contains("delta"), "{err:#}");
}

#[test]
fn unknown_experiment_is_rejected_by_the_parser() {
    assert!(Cli::try_parse_from(["psgld-irl", "repro", "no-such-experiment"]).is_err());
}

#[test]
fn run_psgld_with_no_steps_returns_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{QUAD}[psgld]\nk_hat = 0\n"));
    let v = json(&["--config", &cfg, "--out-dir", &path(dir.path(), "o"), "run-psgld"]);
    assert_eq!(v["k"], 0);
    let trace = std::fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    let rows: Vec<&str> = trace.lines().collect();
    assert_eq!(rows.len(), 2);
    let init: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(v["alpha"][0].as_f64().unwrap().to_bits(), init.to_bits());
}

#[test]
fn forward_events_feed_the_sampler() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{QUAD}[psgld]\nk_hat = 50\n"));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    pool.install(|| {
        json(&["--config", &cfg, "--out-dir", &path(dir.path(), "f"), "run-forward"]);
        let events = path(dir.path(), "f/events.csv");
        let v = json(&["--config", &cfg, "--out-dir", &path(dir.path(), "p"), "run-psgld", "--events", &events]);
        assert_eq!(v["k"], 50);
    });
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "run-psgld");
    assert_eq!(m["threads"], 2);
    let files = m["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["path"] == "trace.csv"), "{files:?}");
}

#[test]
fn metrics_compare_a_cloud_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "x_0\n0.5\n-1.0\n2.0\n");
    let v = json(&["metrics", "--a", &a, "--b", &a]);
    assert_eq!(v["w2"].as_f64(), Some(0.0));
    let g = write(dir.path(), "g.csv", "x_0,value\n0.0,1.0\n1.0,2.0\n");
    let v = json(&["metrics", "--grid-a", &g, "--grid-b", &g]);
    assert_eq!(v["l1_min_aligned"].as_f64(), Some(0.0));
}

#[test]
fn invalid_configs_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[cost]\nkind = \"quadratic\"\nnoise = 1.0\n", "noise"),
        ("[cost]\nkind = \"quadratic\"\n[reconstruct]\nt_streams = 0\n", "reconstruct.t_streams"),
        ("[cost]\nkind = \"quadratic\"\n[forward]\neta = 0.5\n", "η ∈ (0, 1 ∧ m/(4L_∇J²))"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{i}.toml"), text);
        let err = call(&["--config", &cfg, "--out-dir", &path(dir.path(), "o"), "run-psgld"]).unwrap_err();
        assert!(format!("{err:#}").contains(needle), "{err:#}");
    }
}

#[test]
fn repro_prints_the_criterion_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "r");
    let Reply::Line(line) = call(&["--out-dir", &out, "repro", "formulas"]).unwrap() else { panic!("expected a line") };
    assert!(line.starts_with("criterion 5: PASS"), "{line}");
    assert!(dir.path().join("r/criterion_5.json").exists());
    assert!(dir.path().join("r/manifest.json").exists());
}

#[test]
fn replies_end_with_a_newline() {
    assert_eq!(Reply::Line("x".into()).render().unwrap(), "x\n");
    assert!(Reply::Json(serde_json::json!({"a": 1.5})).render().unwrap().ends_with('\n'));
}
