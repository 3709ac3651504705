use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{read_field, write_rows, FieldRow};

/// Relative tolerance on matching centroid coordinates.
const CENTROID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Field file under test.
    pub candidate: PathBuf,
    /// Reference field file; relative metrics are normalized by it.
    pub reference: PathBuf,
    /// Fail (exit 3) if the potential's relative L2 difference exceeds this.
    #[arg(long)]
    pub max_rel_l2: Option<f64>,
    /// Fail (exit 3) if the largest potential difference exceeds this.
    #[arg(long)]
    pub max_abs: Option<f64>,
    /// Write per-row differences here.
    #[arg(long)]
    pub diff: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rows: usize,
    pub phi_rel_l2: f64,
    pub phi_max_abs: f64,
    pub flux_rel_l2: f64,
    pub field_rel_l2: f64,
}

#[derive(Debug, Serialize)]
struct DiffRow {
    cx: f64,
    cy: f64,
    phi_candidate: f64,
    phi_reference: f64,
    phi_diff: f64,
    flux_diff: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn metrics(a: &[FieldRow], b: &[FieldRow]) -> CliResult<Metrics> {
    if a.len() != b.len() {
        return Err(CliError::Input(format!("row count mismatch: {} vs {}", a.len(), b.len())));
    }
    let close = |x: f64, y: f64| (x - y).abs() <= CENTROID_TOLERANCE * (1.0 + x.abs().max(y.abs()));
    let (mut phi, mut phi_ref, mut flux, mut flux_ref, mut field, mut field_ref, mut max_abs) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0f64);
    for (i, (p, q)) in a.iter().zip(b).enumerate() {
        if !(close(p.cx, q.cx) && close(p.cy, q.cy)) {
            return Err(CliError::Input(format!(
                "centroid mismatch at row {}: ({}, {}) vs ({}, {})",
                i + 1,
                p.cx,
                p.cy,
                q.cx,
                q.cy
            )));
        }
        phi += (p.phi - q.phi).powi(2);
        phi_ref += q.phi.powi(2);
        flux += (p.dx - q.dx).powi(2) + (p.dy - q.dy).powi(2);
        flux_ref += q.dx.powi(2) + q.dy.powi(2);
        field += (p.ex - q.ex).powi(2) + (p.ey - q.ey).powi(2);
        field_ref += q.ex.powi(2) + q.ey.powi(2);
        max_abs = max_abs.max((p.phi - q.phi).abs());
    }
    Ok(Metrics {
        rows: a.len(),
        phi_rel_l2: ratio(phi, phi_ref),
        phi_max_abs: max_abs,
        flux_rel_l2: ratio(flux, flux_ref),
        field_rel_l2: ratio(field, field_ref),
    })
}

pub fn run(args: &CompareArgs) -> CliResult<()> {
    let a = read_field(&args.candidate)?;
    let b = read_field(&args.reference)?;
    let m = metrics(&a, &b)?;
    println!("rows = {}", m.rows);
    println!("phi_rel_l2 = {:e}", m.phi_rel_l2);
    println!("phi_max_abs = {:e}", m.phi_max_abs);
    println!("flux_rel_l2 = {:e}", m.flux_rel_l2);
    println!("field_rel_l2 = {:e}", m.field_rel_l2);
    if let Some(path) = &args.diff {
        let rows: Vec<DiffRow> = a
            .iter()
            .zip(&b)
            .map(|(p, q)| DiffRow {
                cx: q.cx,
                cy: q.cy,
                phi_candidate: p.phi,
                phi_reference: q.phi,
                phi_diff: p.phi - q.phi,
                flux_diff: ((p.dx - q.dx).powi(2) + (p.dy - q.dy).powi(2)).sqrt(),
            })
            .collect();
        write_rows(path, &rows)?;
    }
    let mut failures = Vec::new();
    if let Some(limit) = args.max_rel_l2 {
        if !(m.phi_rel_l2 <= limit) {
            failures.push(format!("phi_rel_l2 {:e} > {limit:e}", m.phi_rel_l2));
        }
    }
    if let Some(limit) = args.max_abs {
        if !(m.phi_max_abs <= limit) {
            failures.push(format!("phi_max_abs {:e} > {limit:e}", m.phi_max_abs));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(failures.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(cx: f64, phi: f64) -> FieldRow {
        FieldRow { cx, cy: 0.5, phi, dx: 1.0, dy: 0.0, ex: 1.0, ey: 0.0 }
    }

    #[test]
    fn identical_fields_have_zero_metrics() {
        let a = vec![row(0.1, 1.0), row(0.2, 2.0)];
        let m = metrics(&a, &a).unwrap();
        assert_eq!((m.phi_rel_l2, m.phi_max_abs, m.flux_rel_l2, m.field_rel_l2), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn relative_metrics_use_the_reference() {
        let m = metrics(&[row(0.1, 3.0), row(0.2, 4.0)], &[row(0.1, 0.0), row(0.2, 0.0)]).unwrap();
        assert_eq!(m.phi_rel_l2, f64::INFINITY);
        let m = metrics(&[row(0.1, 3.3), row(0.2, 4.4)], &[row(0.1, 3.0), row(0.2, 4.0)]).unwrap();
        assert!((m.phi_rel_l2 - 0.1).abs() < 1e-12);
        assert!((m.phi_max_abs - 0.4).abs() < 1e-12);
    }

    #[test]
    fn mismatches_are_input_errors() {
        assert!(matches!(metrics(&[row(0.1, 1.0)], &[row(0.1, 1.0), row(0.2, 1.0)]), Err(CliError::Input(_))));
        assert!(matches!(metrics(&[row(0.1, 1.0)], &[row(0.2, 1.0)]), Err(CliError::Input(_))));
    }
}
