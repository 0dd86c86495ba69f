//! Output files.
//!
//! Floats are written as `{:.16e}` (17 significant digits) in both CSV and
//! JSON; non-finite values become `inf`, `-inf`, `NaN` in CSV and `null` in
//! JSON. Every file is newline-terminated UTF-8.

use anyhow::{bail, Context, Result};
use psgld_irl_core::metrics::GridFunction;
use psgld_irl_core::{GradientEvent, ParamVector};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Array output format.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::F(v) => fmt_f64(*v),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::F(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, serde_json::Value::Number),
            Cell::U(v) => (*v).into(),
            Cell::B(v) => (*v).into(),
        }
    }
}

/// Column-named rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "NaN" => Ok(f64::NAN),
        t => t.parse().with_context(|| format!("not a number: {t:?}")),
    }
}

/// Pretty JSON with every float in `{:.16e}`.
struct FixedFloat(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

/// Serializes `value` as pretty JSON with fixed-format floats and a trailing newline.
pub fn to_json_string(value: &impl Serialize) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

/// Writes a table as CSV.
pub fn write_csv(w: impl Write, t: &Table) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wr.write_record(&t.header)?;
    for row in &t.rows {
        if row.len() != t.header.len() {
            bail!("row width {} does not match header width {}", row.len(), t.header.len());
        }
        wr.write_record(row.iter().map(Cell::to_csv))?;
    }
    wr.flush()?;
    Ok(())
}

/// Table as a JSON array of records.
pub fn table_json(t: &Table) -> serde_json::Value {
    let rows = t
        .rows
        .iter()
        .map(|r| serde_json::Value::Object(t.header.iter().cloned().zip(r.iter().map(Cell::to_json)).collect()))
        .collect();
    serde_json::Value::Array(rows)
}

/// One file written by a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
}

/// An output directory that records every file it writes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    format: Format,
    files: Vec<FileEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl OutputDir {
    pub fn create(root: &Path, format: Format) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutputDir { root: root.to_path_buf(), format, files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        if self.files.iter().any(|f| f.path == name) || name == MANIFEST_FILE {
            bail!("output file {name} written twice");
        }
        let path = self.root.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(FileEntry { path: name.to_string(), bytes: bytes.len() as u64 });
        Ok(path)
    }

    /// Writes `stem.csv` or `stem.json` according to the format.
    pub fn write_table(&mut self, stem: &str, t: &Table) -> Result<PathBuf> {
        let name = format!("{stem}.{}", self.format.extension());
        let bytes = match self.format {
            Format::Csv => {
                let mut buf = Vec::new();
                write_csv(&mut buf, t)?;
                buf
            }
            Format::Json => to_json_string(&table_json(t))?.into_bytes(),
        };
        self.write_bytes(&name, &bytes)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let s = to_json_string(value)?;
        self.write_bytes(name, s.as_bytes())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let mut s = text.to_string();
        if !s.ends_with('\n') {
            s.push('\n');
        }
        self.write_bytes(name, s.as_bytes())
    }

    /// Writes the manifest with the file inventory and returns its path.
    pub fn finish(self, manifest: &impl Serialize) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct WithFiles<'a, M: Serialize> {
            #[serde(flatten)]
            manifest: &'a M,
            files: &'a [FileEntry],
        }
        let s = to_json_string(&WithFiles { manifest, files: &self.files })?;
        let path = self.root.join(MANIFEST_FILE);
        std::fs::write(&path, s)?;
        Ok(path)
    }
}

fn coord_header(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

/// `k,theta_0..,grad_0..,reinit,terminal`.
pub fn events_table(events: &[GradientEvent]) -> Table {
    let n = events.first().map_or(0, |e| e.theta.dim());
    let header = std::iter::once("k".to_string())
        .chain(coord_header("theta", n))
        .chain(coord_header("grad", n))
        .chain(["reinit".to_string(), "terminal".to_string()])
        .collect();
    let rows = events
        .iter()
        .map(|e| {
            std::iter::once(Cell::U(e.k))
                .chain(e.theta.iter().map(|v| Cell::F(*v)))
                .chain(e.noisy_grad.iter().map(|v| Cell::F(*v)))
                .chain([Cell::B(e.reinit), Cell::B(e.terminal)])
                .collect()
        })
        .collect();
    Table { header, rows }
}

/// Reads an event CSV.
pub fn read_events(path: &Path) -> Result<Vec<GradientEvent>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let width = rd.headers()?.len();
    if width < 5 || (width - 3) % 2 != 0 {
        bail!("{}: event header must be k,theta_*,grad_*,reinit,terminal", path.display());
    }
    let n = (width - 3) / 2;
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| parse_f64(&rec[i]).with_context(|| format!("{} row {}", path.display(), line + 2));
        let flag = |i: usize| -> Result<bool> {
            rec[i].trim().parse().with_context(|| format!("{} row {}: bad flag", path.display(), line + 2))
        };
        out.push(GradientEvent {
            k: rec[0].trim().parse().with_context(|| format!("{} row {}: bad k", path.display(), line + 2))?,
            theta: ParamVector::new((1..=n).map(num).collect::<Result<_>>()?),
            noisy_grad: ParamVector::new((n + 1..=2 * n).map(num).collect::<Result<_>>()?),
            reinit: flag(2 * n + 1)?,
            terminal: flag(2 * n + 2)?,
        });
    }
    Ok(out)
}

/// `x_0..` per point.
pub fn cloud_table(points: &[ParamVector]) -> Table {
    let n = points.first().map_or(0, |p| p.dim());
    Table {
        header: coord_header("x", n).collect(),
        rows: points.iter().map(|p| p.iter().map(|v| Cell::F(*v)).collect()).collect(),
    }
}

/// Reads a point cloud CSV.
pub fn read_cloud(path: &Path) -> Result<Vec<ParamVector>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        out.push(ParamVector::new(rec.iter().map(parse_f64).collect::<Result<_>>()?));
    }
    Ok(out)
}

/// `x_0..,value` per grid node.
pub fn grid_table(g: &GridFunction) -> Table {
    let n = g.axes.len();
    let header = coord_header("x", n).chain(["value".to_string()]).collect();
    let rows = g
        .points()
        .into_iter()
        .zip(&g.values)
        .map(|(p, v)| p.into_iter().map(Cell::F).chain([Cell::F(*v)]).collect())
        .collect();
    Table { header, rows }
}

/// Reads a grid CSV written by [`grid_table`].
pub fn read_grid(path: &Path) -> Result<GridFunction> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let n = rd.headers()?.len().checked_sub(1).filter(|n| *n > 0).context("grid needs coordinate columns")?;
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut values = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        for (d, axis) in axes.iter_mut().enumerate() {
            axis.push(parse_f64(&rec[d])?);
        }
        values.push(parse_f64(&rec[n])?);
    }
    for axis in &mut axes {
        axis.sort_by(f64::total_cmp);
        axis.dedup();
    }
    Ok(GridFunction::new(axes, values)?)
}

/// `k,alpha_0..` per sampler state.
pub fn trace_table(trace: &[(u64, ParamVector)]) -> Table {
    let n = trace.first().map_or(0, |t| t.1.dim());
    Table {
        header: std::iter::once("k".to_string()).chain(coord_header("alpha", n)).collect(),
        rows: trace
            .iter()
            .map(|(k, a)| std::iter::once(Cell::U(*k)).chain(a.iter().map(|v| Cell::F(*v))).collect())
            .collect(),
    }
}
