//! Deterministic JSON and CSV report emission.
//!
//! Every report is a versioned JSON object (`"schema": 1`).  Floating-point
//! numbers are rendered with 17 significant digits so that identical runs
//! produce byte-identical files, independent of parallelism; `serde_json`'s
//! `arbitrary_precision` feature carries the rendered digits through
//! unchanged.  Convergence studies additionally serialize as CSV with the
//! fixed column set `t_i,j,sup_distance`.

use std::fs;
use std::io;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::adm::{ConstraintReport, GwTraceReport, LeflochResidual, VerifyMode};
use crate::geometry::TensorField;
use crate::rescaling::ConvergenceReport;

/// Report schema version stamped into every JSON document.
pub const SCHEMA_VERSION: u64 = 1;

/// Render a float with 17 significant digits as a JSON number.
///
/// The text form is fixed (`d.dddddddddddddddde±XX`), so equal inputs always
/// produce equal bytes.  Non-finite values cannot appear in a JSON number and
/// are reported as strings.
pub fn number(x: f64) -> Value {
    if !x.is_finite() {
        return Value::String(format!("{x}"));
    }
    let text = format!("{:.16e}", x);
    Value::Number(Number::from_string_unchecked(text))
}

/// Start a report object: schema stamp plus the report kind.
pub fn envelope(kind: &str) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("schema".into(), Value::from(SCHEMA_VERSION));
    map.insert("kind".into(), Value::String(kind.into()));
    map
}

/// Serialize a report object to its canonical byte form (pretty-printed,
/// trailing newline).
pub fn render(map: &Map<String, Value>) -> String {
    let mut out = serde_json::to_string_pretty(&Value::Object(map.clone()))
        .expect("report maps contain only serializable values");
    out.push('\n');
    out
}

/// Write a report object to `path` in the canonical byte form.
pub fn write_json(path: &Path, map: &Map<String, Value>) -> io::Result<()> {
    fs::write(path, render(map))
}

/// Nonzero tensor components as a JSON object.
///
/// Keys are the coordinate names of the indices joined with commas; a
/// `valence` field (`u` per upper, `d` per lower index) disambiguates the
/// slot types.  Components are the printed simplified expressions.
pub fn tensor_value(field: &TensorField) -> Value {
    let chart = field.chart();
    let valence: String = field
        .valence()
        .iter()
        .map(|k| match k {
            crate::geometry::IndexKind::Up => 'u',
            crate::geometry::IndexKind::Down => 'd',
        })
        .collect();
    let mut components = Map::new();
    for idx in field.nonzero_indices() {
        let key: Vec<&str> = idx.iter().map(|&i| chart.coord(i)).collect();
        components.insert(key.join(","), Value::String(field.get(&idx).to_string()));
    }
    let mut map = Map::new();
    map.insert("valence".into(), Value::String(valence));
    map.insert("components".into(), Value::Object(components));
    Value::Object(map)
}

fn mode_str(mode: VerifyMode) -> &'static str {
    match mode {
        VerifyMode::SymbolicZero => "symbolic-zero",
        VerifyMode::NumericBounded => "numeric-bounded",
    }
}

/// Constraint residuals as a JSON value (one entry per check).
pub fn constraint_value(report: &ConstraintReport) -> Value {
    let entries: Vec<Value> = report
        .entries
        .iter()
        .map(|e| {
            let mut map = Map::new();
            map.insert("name".into(), Value::String(e.name.clone()));
            map.insert("mode".into(), Value::String(mode_str(e.mode).into()));
            map.insert("expr".into(), Value::String(e.expr.clone()));
            map.insert("max_abs".into(), number(e.max_abs));
            Value::Object(map)
        })
        .collect();
    Value::Array(entries)
}

/// The backreaction identity check as a JSON value.
pub fn lefloch_value(res: &LeflochResidual) -> Value {
    let mut map = Map::new();
    map.insert("lhs".into(), Value::String(res.lhs.to_string()));
    map.insert("difference".into(), Value::String(res.difference.to_string()));
    map.insert(
        "proportionality".into(),
        Value::String(res.proportionality.to_string()),
    );
    Value::Object(map)
}

/// The stress-energy trace check as a JSON value.
pub fn gw_trace_value(report: &GwTraceReport) -> Value {
    let mut map = Map::new();
    map.insert("trace".into(), Value::String(report.trace.to_string()));
    map.insert("scalar".into(), Value::String(report.scalar.to_string()));
    let frame: Vec<Value> = report
        .frame_components
        .iter()
        .map(|(a, b, e)| {
            let mut m = Map::new();
            m.insert("leg_a".into(), Value::String(a.clone()));
            m.insert("leg_b".into(), Value::String(b.clone()));
            m.insert("expr".into(), Value::String(e.to_string()));
            Value::Object(m)
        })
        .collect();
    map.insert("frame_components".into(), Value::Array(frame));
    Value::Object(map)
}

fn opt_number(x: Option<f64>) -> Value {
    match x {
        Some(v) => number(v),
        None => Value::Null,
    }
}

/// A convergence study as a JSON value: the per-time rows plus the fit.
pub fn convergence_value(report: &ConvergenceReport) -> Value {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|row| {
            let mut m = Map::new();
            m.insert("t_i".into(), number(row.t_i));
            m.insert("j".into(), Value::from(row.j));
            m.insert("sup_distance".into(), number(row.sup_distance));
            Value::Object(m)
        })
        .collect();
    let mut map = Map::new();
    map.insert("rows".into(), Value::Array(rows));
    map.insert("slope".into(), opt_number(report.slope));
    map.insert("intercept".into(), opt_number(report.intercept));
    map.insert("slope_stderr".into(), opt_number(report.slope_stderr));
    map.insert(
        "residuals".into(),
        Value::Array(report.residuals.iter().map(|&r| number(r)).collect()),
    );
    map.insert(
        "grid_points_per_axis".into(),
        Value::from(report.grid_points_per_axis as u64),
    );
    map.insert("j".into(), Value::from(report.j));
    Value::Object(map)
}

/// A convergence study as CSV text with the fixed columns
/// `t_i,j,sup_distance`, one row per basepoint time.
pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("t_i,j,sup_distance\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{}\n",
            csv_number(row.t_i),
            row.j,
            csv_number(row.sup_distance)
        ));
    }
    out
}

/// Write the CSV form of a convergence study.
pub fn write_csv(path: &Path, report: &ConvergenceReport) -> io::Result<()> {
    fs::write(path, convergence_csv(report))
}

/// CSV number rendering: same 17-significant-digit form as JSON.
fn csv_number(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else {
        format!("{x}")
    }
}
