use proptest::prelude::*;
use crate::io::{
    cloud_table, events_table, fmt_f64, grid_table, read_cloud, read_events, read_grid, to_json_string, Cell, Format, OutputDir,
    Table, MANIFEST_FILE,
};
use psgld_irl_core::metrics::GridFunction;
use psgld_irl_core::{GradientEvent, ParamVector};
use serde_json::{json, Value};

#[test]
fn floats_carry_17_significant_digits() {
    assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
    assert_eq!(fmt_f64(f64::INFINITY), "inf");
    assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    assert_eq!(fmt_f64(f64::NAN), "NaN");
}

#[test]
fn json_uses_the_same_float_format() {
    let s = to_json_string(&json!({ "a": 0.1, "b": [1.5, 2], "c": "x" })).unwrap();
    assert_eq!(s, "{\n  \"a\": 1.0000000000000001e-1,\n  \"b\": [\n    1.5000000000000000e0,\n    2\n  ],\n  \"c\": \"x\"\n}\n");
    let back: Value = serde_json::from_str(&s).unwrap();
    assert_eq!(back["a"].as_f64(), Some(0.1));
}

#[test]
fn ragged_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = OutputDir::create(dir.path(), Format::Csv).unwrap();
    let t = Table { header: vec!["a".into(), "b".into()], rows: vec![vec![Cell::F(1.0)]] };
    assert!(out.write_table("t", &t).is_err());
}

#[test]
fn manifest_lists_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = OutputDir::create(dir.path(), Format::Csv).unwrap();
    out.write_table("cloud", &cloud_table(&[ParamVector::new(vec![1.0, 2.0])])).unwrap();
    out.write_json("summary.json", &json!({ "x": 1.0 })).unwrap();
    out.write_text("config.toml", "a = 1").unwrap();
    assert!(out.write_text("config.toml", "again").is_err());
    out.finish(&json!({ "tool": "t" })).unwrap();
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    let mut listed: Vec<String> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap().to_string()).collect();
    listed.push(MANIFEST_FILE.to_string());
    listed.sort();
    let mut on_disk: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    on_disk.sort();
    assert_eq!(listed, on_disk);
    for f in m["files"].as_array().unwrap() {
        let len = std::fs::metadata(dir.path().join(f["path"].as_str().unwrap())).unwrap().len();
        assert_eq!(f["bytes"].as_u64(), Some(len));
    }
    assert_eq!(m["tool"], "t");
}

#[test]
fn json_format_writes_record_arrays() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = OutputDir::create(dir.path(), Format::Json).unwrap();
    let p = out.write_table("cloud", &cloud_table(&[ParamVector::new(vec![0.5])])).unwrap();
    assert_eq!(p.extension().unwrap(), "json");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    assert_eq!(v, json!([{ "x_0": 0.5 }]));
}

#[test]
fn grid_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridFunction::new(vec![vec![-1.0, 0.0, 1.0], vec![0.0, 0.5]], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let mut out = OutputDir::create(dir.path(), Format::Csv).unwrap();
    let p = out.write_table("grid", &grid_table(&g)).unwrap();
    let back = read_grid(&p).unwrap();
    assert_eq!(back.axes, g.axes);
    assert_eq!(back.values, g.values);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e300f64..1e300, -1.0f64..1.0, Just(0.0), Just(-0.0), Just(f64::MIN_POSITIVE), Just(5e-324)]
}

proptest! {
    #[test]
    fn csv_floats_round_trip_bitwise(x in finite()) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn events_round_trip(
        rows in prop::collection::vec((prop::collection::vec(finite(), 2), prop::collection::vec(finite(), 2), any::<bool>()), 1..20)
    ) {
        let n = rows.len();
        let events: Vec<GradientEvent> = rows
            .into_iter()
            .enumerate()
            .map(|(k, (t, g, r))| GradientEvent {
                k: k as u64,
                theta: ParamVector::new(t),
                noisy_grad: ParamVector::new(g),
                reinit: r,
                terminal: k + 1 == n,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path(), Format::Csv).unwrap();
        let p = out.write_table("events", &events_table(&events)).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        prop_assert!(text.starts_with("k,theta_0,theta_1,grad_0,grad_1,reinit,terminal\n"));
        prop_assert!(text.ends_with('\n') && !text.contains('\r'));
        prop_assert_eq!(read_events(&p).unwrap(), events);
    }

    #[test]
    fn clouds_round_trip(pts in prop::collection::vec(prop::collection::vec(finite(), 3), 1..30)) {
        let cloud: Vec<ParamVector> = pts.into_iter().map(ParamVector::new).collect();
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path(), Format::Csv).unwrap();
        let p = out.write_table("cloud", &cloud_table(&cloud)).unwrap();
        prop_assert_eq!(read_cloud(&p).unwrap(), cloud);
    }
}
