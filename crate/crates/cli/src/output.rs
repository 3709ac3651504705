use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One row of a field file: centroid, potential, flux density and field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub cx: f64,
    pub cy: f64,
    pub phi: f64,
    pub dx: f64,
    pub dy: f64,
    pub ex: f64,
    pub ey: f64,
}

/// One sample along a line, `s` being the arc length from its start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineRow {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub dx: f64,
    pub dy: f64,
    pub ex: f64,
    pub ey: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> CliResult<Vec<FieldRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| CliError::csv(path, e))).collect()
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = toml::to_string(value).map_err(|e| CliError::Input(format!("cannot encode report: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}
