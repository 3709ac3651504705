//! Equipotential terminals modelled as high-permittivity extended regions.
//!
//! P1 is the Neumann problem with a compensating charge that restores
//! neutrality; it fixes the pinned terminal and leaves the others floating.
//! P2 places `+1` in the pinned region and `−1` in one floating region; its
//! response is scaled and added so every floating terminal reaches its
//! prescribed value. P2 depends only on geometry, so it is cached.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    check_charges, check_compatibility, divergence_residual, region_mean, region_spread, solve_with_halves,
    Discretization, ProblemSpec, Solution,
};
use crate::error::{Error, Result};
use crate::linalg::GmresConfig;
use crate::mesh::Point2;
use crate::projection::loop_inner_products;

/// One equipotential boundary group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Terminal {
    pub name: String,
    /// Region tag of the extended high-permittivity triangles.
    pub region: u32,
    pub value: f64,
    /// Boundary markers belonging to this terminal. They may not carry
    /// Neumann data.
    #[serde(default)]
    pub markers: Vec<String>,
    /// Where the auxiliary unit charge goes; defaults to the region triangle
    /// nearest the region's centroid.
    #[serde(default)]
    pub charge_point: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirichletOptions {
    /// Index of the terminal whose value is imposed directly.
    pub pinned: usize,
    /// Terminal whose region receives the neutralizing charge; the pinned
    /// one if unset.
    pub compensation: Option<usize>,
    /// Smallest acceptable unit-response potential difference, relative to
    /// the unit response's potential range.
    pub degenerate_threshold: f64,
}

impl Default for DirichletOptions {
    fn default() -> Self {
        Self { pinned: 0, compensation: None, degenerate_threshold: 1e-9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirichletReport {
    pub compensation_charge: f64,
    pub compensation_triangle: usize,
    /// Floating-terminal potentials measured in P1, in terminal order
    /// (the pinned entry holds its imposed value).
    pub p1_potentials: Vec<f64>,
    /// Area-weighted mean potential of each terminal region after superposition.
    pub terminal_potentials: Vec<f64>,
    /// `max − min` of φ inside each terminal region.
    pub terminal_spreads: Vec<f64>,
    /// Superposition weight per terminal (0 for the pinned one).
    pub weights: Vec<f64>,
    pub p1_iterations: usize,
    /// Iterations of unit solves computed during this call (0 if all cached).
    pub p2_iterations: usize,
    pub p2_cache_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct P2Key {
    fingerprint: u64,
    eps0: u64,
    positive: (u32, usize),
    negative: (u32, usize),
    tolerance: u64,
    restart: usize,
    max_iterations: usize,
}

pub fn solve_dirichlet(disc: &Discretization, spec: &ProblemSpec) -> Result<Solution> {
    let mesh = disc.mesh();
    let terminals = &spec.terminals;
    let opts = &spec.dirichlet;
    if terminals.is_empty() {
        return Err(Error::Config("no Dirichlet terminals given".into()));
    }
    if opts.pinned >= terminals.len() {
        return Err(Error::Config(format!("pinned terminal index {} out of range", opts.pinned)));
    }
    let compensation = opts.compensation.unwrap_or(opts.pinned);
    if compensation >= terminals.len() {
        return Err(Error::Config(format!("compensation terminal index {compensation} out of range")));
    }
    let mut seen = BTreeSet::new();
    for term in terminals {
        if !seen.insert(term.region) {
            return Err(Error::Config(format!("region {} used by more than one terminal", term.region)));
        }
        if !term.value.is_finite() {
            return Err(Error::Config(format!("terminal '{}' has a non-finite value", term.name)));
        }
        if !(0..mesh.num_triangles()).any(|t| mesh.region(t) == term.region) {
            return Err(Error::Config(format!(
                "terminal '{}' refers to region {} but the mesh has no triangle with that tag",
                term.name, term.region
            )));
        }
        for marker in &term.markers {
            if !disc.topology().boundary_edges().iter().any(|e| &e.marker == marker) {
                return Err(Error::Config(format!("terminal '{}': no boundary edge carries marker '{marker}'", term.name)));
            }
        }
    }
    let charge_tris = terminals.iter().map(|t| charge_triangle(disc, t)).collect::<Result<Vec<_>>>()?;

    // P1: Neumann problem made neutral by the compensation charge.
    let halves = disc.half_rwgs(&spec.neumann, &spec.dirichlet_markers())?;
    let mut charges = check_charges(disc, &spec.charges)?;
    let residual = check_compatibility(&charges, &halves);
    let q_comp = -residual;
    charges[charge_tris[compensation]] += q_comp;
    let mut sol = solve_with_halves(disc, charges, halves, &spec.gmres)?;
    sol.diagnostics.compatibility_residual = residual;
    let pinned = &terminals[opts.pinned];
    let shift = pinned.value - region_mean(mesh, &sol.potential, pinned.region).expect("region checked above");
    sol.shift_potential(shift);
    let p1_potentials: Vec<f64> =
        terminals.iter().map(|t| region_mean(mesh, &sol.potential, t.region).expect("region checked")).collect();
    let p1_iterations = sol.diagnostics.gmres_iterations;

    // P2: one unit response per floating terminal.
    let floating: Vec<usize> = (0..terminals.len()).filter(|&i| i != opts.pinned).collect();
    let mut responses = Vec::with_capacity(floating.len());
    let (mut p2_iterations, mut hits) = (0, 0);
    for &i in &floating {
        let key = P2Key {
            fingerprint: mesh.fingerprint(),
            eps0: disc.eps0().to_bits(),
            positive: (pinned.region, charge_tris[opts.pinned]),
            negative: (terminals[i].region, charge_tris[i]),
            tolerance: spec.gmres.rel_tolerance.to_bits(),
            restart: spec.gmres.restart,
            max_iterations: spec.gmres.max_iterations,
        };
        let cached = disc.p2_cache.lock().ok().and_then(|c| c.get(&key).cloned());
        let unit = match cached {
            Some(u) => {
                hits += 1;
                u
            }
            None => {
                let u = Arc::new(unit_response(disc, charge_tris[opts.pinned], charge_tris[i], pinned.region, &spec.gmres)?);
                p2_iterations += u.diagnostics.gmres_iterations;
                sol.diagnostics.timings.add(&u.diagnostics.timings);
                if let Ok(mut c) = disc.p2_cache.lock() {
                    c.insert(key, Arc::clone(&u));
                }
                u
            }
        };
        responses.push(unit);
    }

    let mut weights = vec![0.0; terminals.len()];
    if !floating.is_empty() {
        let matrix: Vec<Vec<f64>> = floating
            .iter()
            .map(|&j| responses.iter().map(|u| region_mean(mesh, &u.potential, terminals[j].region).unwrap()).collect())
            .collect();
        let rhs: Vec<f64> = floating.iter().map(|&j| terminals[j].value - p1_potentials[j]).collect();
        let range = responses
            .iter()
            .map(|u| u.potential.iter().fold(0.0f64, |a, v| a.max(v.abs())))
            .fold(0.0f64, f64::max);
        let alpha = solve_small(matrix, rhs, opts.degenerate_threshold * range).ok_or_else(|| {
            Error::Degenerate("unit-charge response gives no usable potential difference between terminals".into())
        })?;
        for ((&i, a), u) in floating.iter().zip(alpha).zip(&responses) {
            weights[i] = a;
            sol.add_scaled(a, u);
            sol.diagnostics.pollution_norm += a.abs() * u.diagnostics.pollution_norm;
        }
    }

    // Diagnostics on the superposed field.
    let half_coeffs: Vec<f64> = sol.half_rwgs.iter().map(|h| h.coefficient).collect();
    let coupling = disc.coupling().with_half_rwgs(mesh, disc.basis(), &sol.half_rwgs, disc.eps0());
    let inner = loop_inner_products(disc.gram(), &coupling, &sol.loop_coeffs, &sol.tree_coeffs, &half_coeffs)?;
    sol.diagnostics.loop_orthogonality = inner.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    sol.diagnostics.charge_residual = divergence_residual(disc, &sol.flux, &sol.charges, &sol.tree_coeffs, &sol.half_rwgs);
    sol.diagnostics.gmres_iterations = p1_iterations + p2_iterations;
    sol.diagnostics.dirichlet = Some(DirichletReport {
        compensation_charge: q_comp,
        compensation_triangle: charge_tris[compensation],
        p1_potentials,
        terminal_potentials: terminals.iter().map(|t| region_mean(mesh, &sol.potential, t.region).unwrap()).collect(),
        terminal_spreads: terminals.iter().map(|t| region_spread(mesh, &sol.potential, t.region).unwrap()).collect(),
        weights,
        p1_iterations,
        p2_iterations,
        p2_cache_hits: hits,
    });
    Ok(sol)
}

/// `+1` on `positive`, `−1` on `negative`, homogeneous Neumann, shifted so
/// the mean over `zero_region` is 0.
fn unit_response(disc: &Discretization, positive: usize, negative: usize, zero_region: u32, cfg: &GmresConfig) -> Result<Solution> {
    let mut q = vec![0.0; disc.mesh().num_triangles()];
    q[positive] += 1.0;
    q[negative] -= 1.0;
    let mut u = solve_with_halves(disc, q, Vec::new(), cfg)?;
    let shift = -region_mean(disc.mesh(), &u.potential, zero_region).expect("region checked");
    u.shift_potential(shift);
    Ok(u)
}

fn charge_triangle(disc: &Discretization, term: &Terminal) -> Result<usize> {
    let mesh = disc.mesh();
    if let Some([x, y]) = term.charge_point {
        let t = disc.locate(Point2::new(x, y))?;
        if mesh.region(t) != term.region {
            return Err(Error::Config(format!(
                "charge point of terminal '{}' lies in region {}, not {}",
                term.name,
                mesh.region(t),
                term.region
            )));
        }
        return Ok(t);
    }
    let tris: Vec<usize> = (0..mesh.num_triangles()).filter(|&t| mesh.region(t) == term.region).collect();
    let area: f64 = tris.iter().map(|&t| mesh.area(t)).sum();
    let center = tris.iter().fold(Point2::ORIGIN, |acc, &t| acc + mesh.centroid(t) * (mesh.area(t) / area));
    Ok(*tris
        .iter()
        .min_by(|&&a, &&b| {
            let (da, db) = ((mesh.centroid(a) - center).norm(), (mesh.centroid(b) - center).norm());
            da.total_cmp(&db)
        })
        .expect("region is not empty"))
}

/// Gaussian elimination with partial pivoting; `None` if a pivot magnitude
/// does not exceed `min_pivot`.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, min_pivot: f64) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[p][col].abs() > min_pivot) {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}
