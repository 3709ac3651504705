use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use ltpoisson_core::problems::Family;
use ltpoisson_core::scaling::{record_slope, run_scaling, Method, ScalingRecord};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::write_rows;

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Problem family: square, square-jump, parallel-plate or flag.
    #[arg(long, default_value = "square")]
    pub family: Family,
    /// Comma-separated cells per unit length, e.g. 32,64,128.
    #[arg(long)]
    pub sizes: String,
    #[arg(long, value_delimiter = ',', default_value = "pps")]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "1e-2")]
    pub tols: Vec<f64>,
    /// Write the timing table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the fitted log-log slopes as CSV.
    #[arg(long)]
    pub slopes: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub method: Method,
    pub tolerance: f64,
    pub column: &'static str,
    pub slope: f64,
}

fn parse_sizes(text: &str) -> CliResult<Vec<usize>> {
    let sizes = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| CliError::Usage(format!("invalid size '{s}'"))))
        .collect::<CliResult<Vec<_>>>()?;
    if sizes.is_empty() {
        return Err(CliError::Usage("--sizes needs at least one mesh size".into()));
    }
    Ok(sizes)
}

pub fn slopes(records: &[ScalingRecord], methods: &[Method], tols: &[f64]) -> Vec<SlopeRow> {
    let columns: [(&'static str, fn(&ScalingRecord) -> f64); 5] = [
        ("total", |r| r.total),
        ("solve", |r| r.solve),
        ("tree_solve", |r| r.tree_solve),
        ("transpose_solve", |r| r.transpose_solve),
        ("iterations", |r| r.iterations as f64),
    ];
    let mut out = Vec::new();
    for &method in methods {
        for &tol in tols {
            for (column, f) in columns {
                if method == Method::Fem && matches!(column, "tree_solve" | "transpose_solve") {
                    continue;
                }
                if let Some(slope) = record_slope(records, method, tol, f) {
                    out.push(SlopeRow { method, tolerance: tol, column, slope });
                }
            }
        }
    }
    out
}

pub fn run(args: &BenchmarkArgs) -> CliResult<()> {
    let sizes = parse_sizes(&args.sizes)?;
    if args.methods.is_empty() || args.tols.is_empty() {
        return Err(CliError::Usage("need at least one method and one tolerance".into()));
    }
    let records = run_scaling(args.family, &sizes, &args.methods, &args.tols)?;
    match &args.out {
        Some(path) => write_rows(path, &records)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in &records {
                w.serialize(r).map_err(|e| CliError::Input(e.to_string()))?;
            }
            w.flush()?;
        }
    }
    let fitted = slopes(&records, &args.methods, &args.tols);
    if let Some(path) = &args.slopes {
        write_rows(path, &fitted)?;
    }
    let mut err = std::io::stderr().lock();
    for s in &fitted {
        writeln!(err, "slope {} tol={:e} {}: {:.3}", s.method, s.tolerance, s.column, s.slope)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_lists() {
        assert_eq!(parse_sizes("32, 64,128").unwrap(), vec![32, 64, 128]);
        assert!(matches!(parse_sizes(""), Err(CliError::Usage(_))));
        assert!(matches!(parse_sizes(" , "), Err(CliError::Usage(_))));
        assert!(matches!(parse_sizes("32,x"), Err(CliError::Usage(_))));
    }
}
