//! CSV fields and the JSON run report.

use std::io;
use std::path::Path;

use rsgame_core::discretize::Grid;
use rsgame_core::hjb::ValueField;
use rsgame_core::model::MAX_DIM;
use rsgame_core::simulate::CostEstimate;
use rsgame_core::StrategyField;
use serde_json::{json, Value};

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> io::Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(io::Error::from)
}

fn coord_header(d: usize) -> impl Iterator<Item = String> {
    (1..=d).map(|i| format!("x{i}"))
}

fn point(grid: &Grid, i: usize) -> impl Iterator<Item = String> {
    let mut x = [0.0; MAX_DIM];
    grid.point_into(i, &mut x);
    x.into_iter().take(grid.dim()).map(fmt_f64)
}

/// Columns `theta, x1.., value`, one row per (level, node).
pub fn write_values(path: &Path, grid: &Grid, v: &ValueField) -> io::Result<()> {
    let mut w = writer(path)?;
    let head: Vec<String> = std::iter::once("theta".into()).chain(coord_header(grid.dim())).chain(std::iter::once("value".into())).collect();
    w.write_record(&head)?;
    for (j, th) in v.thetas().iter().enumerate() {
        for i in 0..v.nodes() {
            let row: Vec<String> = std::iter::once(fmt_f64(*th)).chain(point(grid, i)).chain(std::iter::once(fmt_f64(v.at(j, i)))).collect();
            w.write_record(&row)?;
        }
    }
    w.flush()
}

/// Columns `theta, x1.., w_action_0..`; a stationary field is written once at `thetas[0]`.
pub fn write_strategies(path: &Path, grid: &Grid, s: &StrategyField, thetas: &[f64]) -> io::Result<()> {
    let mut w = writer(path)?;
    let head: Vec<String> = std::iter::once("theta".into())
        .chain(coord_header(grid.dim()))
        .chain((0..s.actions()).map(|u| format!("w_action_{u}")))
        .collect();
    w.write_record(&head)?;
    for j in 0..s.levels() {
        for i in 0..s.nodes() {
            let row: Vec<String> = std::iter::once(fmt_f64(thetas[j]))
                .chain(point(grid, i))
                .chain(s.at(j, i).iter().map(|p| fmt_f64(*p)))
                .collect();
            w.write_record(&row)?;
        }
    }
    w.flush()
}

/// Columns `x1.., psi`.
pub fn write_ergodic(path: &Path, grid: &Grid, psi: &[f64]) -> io::Result<()> {
    write_nodal(path, grid, "psi", psi)
}

/// Columns `x1.., <column>` with one value per node.
pub fn write_nodal(path: &Path, grid: &Grid, column: &str, values: &[f64]) -> io::Result<()> {
    let mut w = writer(path)?;
    let head: Vec<String> = coord_header(grid.dim()).chain(std::iter::once(column.to_string())).collect();
    w.write_record(&head)?;
    for (i, p) in values.iter().enumerate() {
        let row: Vec<String> = point(grid, i).chain(std::iter::once(fmt_f64(*p))).collect();
        w.write_record(&row)?;
    }
    w.flush()
}

/// Columns `path, x1..` with the final position of each path.
pub fn write_paths(path: &Path, d: usize, ends: &[[f64; MAX_DIM]]) -> io::Result<()> {
    let mut w = writer(path)?;
    let head: Vec<String> = std::iter::once("path".into()).chain(coord_header(d)).collect();
    w.write_record(&head)?;
    for (p, x) in ends.iter().enumerate() {
        let row: Vec<String> = std::iter::once(p.to_string()).chain(x.iter().take(d).map(|v| fmt_f64(*v))).collect();
        w.write_record(&row)?;
    }
    w.flush()
}

/// A number with the tolerance it was checked against.
pub fn checked(value: f64, tol: f64, pass: bool) -> Value {
    json!({ "value": value, "tol": tol, "pass": pass })
}

pub fn estimate(e: &CostEstimate) -> Value {
    json!({ "value": e.estimate, "std_error": e.std_error, "paths": e.paths })
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn write_report(path: &Path, report: &Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(io::Error::from)?;
    text.push('\n');
    std::fs::write(path, text)
}
