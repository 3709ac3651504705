use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use ltpoisson_core::config::ProblemConfig;
use ltpoisson_core::fem::{fem_flux, fem_to_triangle_average, solve_fem};
use ltpoisson_core::mesh::load_mesh;
use ltpoisson_core::scaling::{solve_pps, Method};
use ltpoisson_core::solver::MeshCounts;
use ltpoisson_core::{Discretization, Point2};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{write_rows, write_toml, FieldRow, LineRow};

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem description (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Mesh file.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Directory for field.csv, report.toml and line.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "pps")]
    pub method: Method,
    /// GMRES relative tolerance, overriding the config.
    #[arg(long)]
    pub tol: Option<f64>,
    /// GMRES restart length, overriding the config.
    #[arg(long)]
    pub restart: Option<usize>,
    /// Sample along the segment `x0,y0,x1,y1` into line.csv.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub line: Option<Vec<f64>>,
    /// Number of points on the sample line.
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    method: String,
    mesh: MeshCounts,
    timings: Timings,
    solver: SolverReport,
    #[serde(rename = "terminal", skip_serializing_if = "Vec::is_empty")]
    terminals: Vec<TerminalReport>,
}

#[derive(Debug, Default, Serialize)]
struct Timings {
    assembly: f64,
    tree_solve: f64,
    projection: f64,
    transpose_solve: f64,
    recovery: f64,
    solve: f64,
    total: f64,
}

#[derive(Debug, Default, Serialize)]
struct SolverReport {
    tolerance: f64,
    restart: usize,
    gmres_iterations: usize,
    gmres_relative_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pollution_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loop_orthogonality: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    charge_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compatibility_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unknowns: Option<usize>,
}

#[derive(Debug, Serialize)]
struct TerminalReport {
    name: String,
    value: f64,
    potential: f64,
    spread: f64,
}

pub fn run(args: &SolveArgs) -> CliResult<()> {
    if let Some(seg) = &args.line {
        if seg.len() != 4 {
            return Err(CliError::Usage(format!("--line needs x0,y0,x1,y1, got {} values", seg.len())));
        }
        if args.samples < 2 {
            return Err(CliError::Usage("--samples must be at least 2".into()));
        }
    }
    let mut cfg = ProblemConfig::load(&args.config)?;
    if let Some(tol) = args.tol {
        cfg.gmres.rel_tolerance = tol;
    }
    if let Some(restart) = args.restart {
        cfg.gmres.restart = restart;
    }
    cfg.gmres.validate()?;

    let file = std::fs::File::open(&args.mesh)?;
    let mesh = load_mesh(std::io::BufReader::new(file))?;
    let start = Instant::now();
    let disc = Discretization::with_root(mesh, cfg.eps0, cfg.tree_root)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let spec = cfg.to_spec(&disc, base)?;
    let assembly = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(&args.out)?;
    let mesh = disc.mesh();

    let mut timings = Timings { assembly, ..Timings::default() };
    let mut solver = SolverReport { tolerance: spec.gmres.rel_tolerance, restart: spec.gmres.restart, ..SolverReport::default() };
    let mut terminals = Vec::new();
    let (field, line): (Vec<FieldRow>, Option<Vec<LineRow>>) = match args.method {
        Method::Pps => {
            let start = Instant::now();
            let sol = solve_pps(&disc, &spec)?;
            timings.solve = start.elapsed().as_secs_f64();
            let d = &sol.diagnostics;
            timings.tree_solve = d.timings.tree_solve;
            timings.projection = d.timings.projection;
            timings.transpose_solve = d.timings.transpose_solve;
            timings.recovery = d.timings.recovery;
            solver.gmres_iterations = d.gmres_iterations;
            solver.gmres_relative_residual = d.gmres_relative_residual;
            solver.pollution_norm = Some(d.pollution_norm);
            solver.loop_orthogonality = Some(d.loop_orthogonality);
            solver.charge_residual = Some(d.charge_residual);
            solver.compatibility_residual = Some(d.compatibility_residual);
            if let Some(rep) = &d.dirichlet {
                for (i, t) in spec.terminals.iter().enumerate() {
                    terminals.push(TerminalReport {
                        name: t.name.clone(),
                        value: t.value,
                        potential: rep.terminal_potentials[i],
                        spread: rep.terminal_spreads[i],
                    });
                }
            }
            let field = sol
                .centroid_samples(&disc)
                .into_iter()
                .map(|s| FieldRow {
                    cx: s.point.x,
                    cy: s.point.y,
                    phi: s.potential,
                    dx: s.flux.x,
                    dy: s.flux.y,
                    ex: s.field.x,
                    ey: s.field.y,
                })
                .collect();
            let line = match &args.line {
                Some(seg) => Some(
                    sol.sample_polyline(&disc, &[Point2::new(seg[0], seg[1]), Point2::new(seg[2], seg[3])], args.samples - 1)?
                        .into_iter()
                        .map(|l| {
                            let s = l.sample;
                            LineRow {
                                s: l.arc_length,
                                x: s.point.x,
                                y: s.point.y,
                                phi: s.potential,
                                dx: s.flux.x,
                                dy: s.flux.y,
                                ex: s.field.x,
                                ey: s.field.y,
                            }
                        })
                        .collect(),
                ),
                None => None,
            };
            (field, line)
        }
        Method::Fem => {
            let sol = solve_fem(mesh, disc.topology(), &spec, disc.eps0())?;
            timings.assembly += sol.assembly_time;
            timings.solve = sol.solve_time;
            solver.gmres_iterations = sol.iterations;
            solver.gmres_relative_residual = sol.relative_residual;
            solver.unknowns = Some(sol.unknowns);
            let avg = fem_to_triangle_average(mesh, &sol.nodal);
            let row = |t: usize| {
                let d = fem_flux(mesh, &sol.nodal, t, disc.eps0());
                let e = d * (1.0 / disc.permittivity(t));
                (d, e)
            };
            let field = (0..mesh.num_triangles())
                .map(|t| {
                    let c = mesh.centroid(t);
                    let (d, e) = row(t);
                    FieldRow { cx: c.x, cy: c.y, phi: avg[t], dx: d.x, dy: d.y, ex: e.x, ey: e.y }
                })
                .collect();
            let line = match &args.line {
                Some(seg) => {
                    let (a, b) = (Point2::new(seg[0], seg[1]), Point2::new(seg[2], seg[3]));
                    let len = (b - a).norm();
                    let mut rows = Vec::with_capacity(args.samples);
                    for i in 0..args.samples {
                        let f = i as f64 / (args.samples - 1) as f64;
                        let p = a + (b - a) * f;
                        let t = disc.locate(p)?;
                        let nodes = mesh.triangle(t).nodes;
                        let c = mesh.centroid(t);
                        let phi: f64 =
                            (0..3).map(|k| sol.nodal[nodes[k]] * (1.0 / 3.0 + mesh.hat_gradient(t, k).dot(p - c))).sum();
                        let (d, e) = row(t);
                        rows.push(LineRow { s: f * len, x: p.x, y: p.y, phi, dx: d.x, dy: d.y, ex: e.x, ey: e.y });
                    }
                    Some(rows)
                }
                None => None,
            };
            (field, line)
        }
    };
    timings.total = start.elapsed().as_secs_f64();

    write_rows(&args.out.join("field.csv"), &field)?;
    if let Some(line) = line {
        write_rows(&args.out.join("line.csv"), &line)?;
    }
    let report = Report { method: args.method.to_string(), mesh: disc.counts(), timings, solver, terminals };
    write_toml(&args.out.join("report.toml"), &report)?;
    println!(
        "{}: {} triangles, {} GMRES iterations, {:.3} s",
        args.method,
        report.mesh.triangles,
        report.solver.gmres_iterations,
        report.timings.total
    );
    Ok(())
}
