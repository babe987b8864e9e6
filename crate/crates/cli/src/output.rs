use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use wavewell::solver::TrajectoryRecord;

use crate::CliError;

pub const TIMESERIES_HEADER: &str = "t,E,J,I,B,psi,psi_dot,grad_sq,dt";

/// 17 significant digits; missing values are empty fields.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_timeseries(path: &Path, rec: &TrajectoryRecord) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{TIMESERIES_HEADER}")?;
    for ((t, s), dt) in rec.times.iter().zip(&rec.snapshots).zip(&rec.steps) {
        let row = [*t, s.energy, s.potential, s.nehari, s.remainder, s.psi, s.psi_dot, s.grad_sq, *dt];
        writeln!(w, "{}", row.map(num).join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Run(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_rows(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.flush()?;
    Ok(())
}
