//! Timing harness for the complexity experiments: per-stage wall times of
//! both methods over a family of meshes, and log-log slope fits.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::solve_fem;
use crate::problems::Family;
use crate::treesolve::IncidenceSystem;
use crate::solver::{solve_dirichlet, solve_neumann, Discretization, ProblemSpec, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pps,
    Fem,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pps => "pps",
            Method::Fem => "fem",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pps" => Ok(Method::Pps),
            "fem" => Ok(Method::Fem),
            _ => Err(Error::Config(format!("unknown method '{s}' (expected pps or fem)"))),
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`. `None` with fewer than two
/// distinct positive abscissae or any non-positive value.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Median wall time in seconds of `reps` calls.
pub fn median_time(reps: usize, mut f: impl FnMut()) -> f64 {
    let mut times: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[times.len() / 2]
}

/// Solves with terminals if the problem has any.
pub fn solve_pps(disc: &Discretization, spec: &ProblemSpec) -> Result<Solution> {
    if spec.terminals.is_empty() {
        solve_neumann(disc, spec)
    } else {
        solve_dirichlet(disc, spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRecord {
    pub family: &'static str,
    pub resolution: usize,
    pub triangles: usize,
    pub method: Method,
    pub tolerance: f64,
    pub assembly: f64,
    pub tree_solve: f64,
    pub projection: f64,
    pub transpose_solve: f64,
    /// Everything after assembly.
    pub solve: f64,
    pub total: f64,
    pub iterations: usize,
}

/// Runs every (size, method, tolerance) combination once.
///
/// PPS assembly is the mesh-only discretization; its unit Dirichlet
/// responses are computed in the first solve at each tolerance and counted
/// there.
pub fn run_scaling(family: Family, sizes: &[usize], methods: &[Method], tolerances: &[f64]) -> Result<Vec<ScalingRecord>> {
    if sizes.is_empty() {
        return Err(Error::Config("empty size list".into()));
    }
    if methods.is_empty() || tolerances.is_empty() {
        return Err(Error::Config("need at least one method and one tolerance".into()));
    }
    let mut out = Vec::new();
    for &n in sizes {
        let start = Instant::now();
        let disc = Discretization::new(family.mesh(n)?, 1.0)?;
        let spec = family.spec(&disc)?;
        let assembly = start.elapsed().as_secs_f64();
        for &method in methods {
            for &tol in tolerances {
                let mut spec = spec.clone();
                spec.gmres.rel_tolerance = tol;
                let record = match method {
                    Method::Pps => {
                        let start = Instant::now();
                        let sol = solve_pps(&disc, &spec)?;
                        let solve = start.elapsed().as_secs_f64();
                        let t = sol.diagnostics.timings;
                        ScalingRecord {
                            family: family.name(),
                            resolution: n,
                            triangles: disc.mesh().num_triangles(),
                            method,
                            tolerance: tol,
                            assembly,
                            tree_solve: t.tree_solve,
                            projection: t.projection,
                            transpose_solve: t.transpose_solve,
                            solve,
                            total: assembly + solve,
                            iterations: sol.diagnostics.gmres_iterations,
                        }
                    }
                    Method::Fem => {
                        let start = Instant::now();
                        let sol = solve_fem(disc.mesh(), disc.topology(), &spec, disc.eps0())?;
                        let total = start.elapsed().as_secs_f64();
                        ScalingRecord {
                            family: family.name(),
                            resolution: n,
                            triangles: disc.mesh().num_triangles(),
                            method,
                            tolerance: tol,
                            assembly: sol.assembly_time,
                            tree_solve: 0.0,
                            projection: 0.0,
                            transpose_solve: 0.0,
                            solve: sol.solve_time,
                            total,
                            iterations: sol.iterations,
                        }
                    }
                };
                out.push(record);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeTiming {
    pub triangles: usize,
    pub tree_solve: f64,
    pub transpose_solve: f64,
}

/// Times of the two tree traversals on the square family, with preallocated
/// buffers. Sizes are measured round-robin and each reported time is the
/// smallest per-round median, so background load cannot favour one size.
pub fn tree_timings(sizes: &[usize]) -> Result<Vec<TreeTiming>> {
    const ROUNDS: usize = 9;
    struct Setup {
        inc: IncidenceSystem,
        charges: Vec<f64>,
        flux: Vec<f64>,
        tree: Vec<f64>,
        reps: usize,
        best: (f64, f64),
    }
    let mut setups = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let disc = Discretization::new(Family::Square.mesh(n)?, 1.0)?;
        let charges = Family::Square.spec(&disc)?.charges;
        let inc = disc.incidence().clone();
        let flux = vec![0.0; charges.len()];
        let tree = inc.solve_tree(&charges, &flux)?;
        // Enough repetitions that each measurement spans a few milliseconds.
        let reps = (2_000_000 / charges.len()).clamp(5, 400);
        setups.push(Setup { inc, charges, flux, tree, reps, best: (f64::INFINITY, f64::INFINITY) });
    }
    let mut sink = 0.0;
    let (mut t_out, mut nu, mut scratch) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..ROUNDS {
        for s in &mut setups {
            t_out.resize(s.tree.len(), 0.0);
            nu.resize(s.charges.len(), 0.0);
            let forward = median_time(s.reps, || {
                s.inc.solve_tree_into(&s.charges, &s.flux, &mut t_out, &mut scratch).expect("neutral square source");
                sink += t_out[0];
            });
            let transpose = median_time(s.reps, || {
                s.inc.solve_tree_transpose_into(&s.tree, (0, 0.0), &mut nu, &mut scratch).expect("valid reference");
                sink += nu[nu.len() - 1];
            });
            s.best = (s.best.0.min(forward), s.best.1.min(transpose));
        }
    }
    std::hint::black_box(sink);
    Ok(setups
        .iter()
        .map(|s| TreeTiming { triangles: s.charges.len(), tree_solve: s.best.0, transpose_solve: s.best.1 })
        .collect())
}

/// Slope of `field` against triangle count for the records of one method
/// and tolerance.
pub fn record_slope(records: &[ScalingRecord], method: Method, tolerance: f64, field: impl Fn(&ScalingRecord) -> f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.method == method && r.tolerance == tolerance)
        .map(|r| (r.triangles as f64, field(r)))
        .collect();
    loglog_slope(&pts)
}
