//! Nodal P1 Galerkin solver sharing the mesh, problem data and GMRES of the
//! loop-tree pipeline. Used as a correctness oracle and as the baseline for
//! iteration and timing comparisons.
//!
//! Terminal regions are excluded from the FEM domain; their interface nodes
//! (and nodes on terminal markers) become Dirichlet nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;

use crate::basis::neumann_half_rwgs;
use crate::error::{Error, Result};
use crate::linalg::{gmres, SparseMatrix};
use crate::mesh::{EdgeTopology, Mesh, Point2};
use crate::solver::{ProblemSpec, Reference};
use crate::treesolve::NEUTRALITY_TOLERANCE;

#[derive(Debug, Clone)]
pub struct FemSolution {
    /// Potential at every mesh node (terminal-only nodes hold their terminal value).
    pub nodal: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub unknowns: usize,
    pub assembly_time: f64,
    pub solve_time: f64,
}

/// Stiffness `Σ_T ε_T ∇Δ_i·∇Δ_j A_T` over the given triangles, in node numbering.
pub fn assemble_stiffness(mesh: &Mesh, eps0: f64, include: &[bool]) -> SparseMatrix {
    let n = mesh.num_nodes();
    let triplets: Vec<(usize, usize, f64)> = (0..mesh.num_triangles())
        .into_par_iter()
        .filter(|&t| include[t])
        .flat_map_iter(|t| {
            let w = eps0 * mesh.eps_r(t) * mesh.area(t);
            let nodes = mesh.triangle(t).nodes;
            let grads: [Point2; 3] = std::array::from_fn(|k| mesh.hat_gradient(t, k));
            let mut out = Vec::with_capacity(9);
            for a in 0..3 {
                for b in 0..3 {
                    out.push((nodes[a], nodes[b], w * grads[a].dot(grads[b])));
                }
            }
            out
        })
        .collect();
    SparseMatrix::from_triplets(n, n, &triplets)
}

pub fn solve_fem(mesh: &Mesh, topo: &EdgeTopology, spec: &ProblemSpec, eps0: f64) -> Result<FemSolution> {
    spec.gmres.validate()?;
    let start = Instant::now();
    let n_nodes = mesh.num_nodes();
    if spec.charges.len() != mesh.num_triangles() {
        return Err(Error::Dimension { context: "per-triangle charges", expected: mesh.num_triangles(), got: spec.charges.len() });
    }
    let terminal_regions: BTreeMap<u32, f64> = spec.terminals.iter().map(|t| (t.region, t.value)).collect();
    let include: Vec<bool> = (0..mesh.num_triangles()).map(|t| !terminal_regions.contains_key(&mesh.region(t))).collect();
    if !include.iter().any(|&b| b) {
        return Err(Error::Config("every triangle belongs to a terminal region".into()));
    }

    // Dirichlet values from terminal regions and terminal markers.
    let mut fixed: Vec<Option<f64>> = vec![None; n_nodes];
    let mut set_fixed = |node: usize, value: f64| -> Result<()> {
        match fixed[node] {
            Some(v) if v != value => Err(Error::Config(format!("node {node} touches two terminals with different values"))),
            _ => {
                fixed[node] = Some(value);
                Ok(())
            }
        }
    };
    for t in 0..mesh.num_triangles() {
        if let Some(&v) = terminal_regions.get(&mesh.region(t)) {
            for node in mesh.triangle(t).nodes {
                set_fixed(node, v)?;
            }
        }
    }
    let marker_value: BTreeMap<&str, f64> =
        spec.terminals.iter().flat_map(|t| t.markers.iter().map(move |m| (m.as_str(), t.value))).collect();
    for edge in topo.boundary_edges() {
        if let Some(&v) = marker_value.get(edge.marker.as_str()) {
            for node in edge.nodes {
                set_fixed(node, v)?;
            }
        }
    }
    let in_domain = {
        let mut d = vec![false; n_nodes];
        for t in (0..mesh.num_triangles()).filter(|&t| include[t]) {
            for node in mesh.triangle(t).nodes {
                d[node] = true;
            }
        }
        d
    };

    // Load: charge split over vertices, Neumann flux split over edge endpoints.
    let mut load = vec![0.0; n_nodes];
    for t in (0..mesh.num_triangles()).filter(|&t| include[t]) {
        for node in mesh.triangle(t).nodes {
            load[node] += spec.charges[t] / 3.0;
        }
    }
    let dirichlet_markers: BTreeSet<String> = spec.dirichlet_markers();
    for h in neumann_half_rwgs(mesh, topo, &spec.neumann, &dirichlet_markers, eps0)? {
        if !include[h.triangle] {
            continue;
        }
        for node in topo.boundary_edge(h.boundary_edge).nodes {
            load[node] -= h.coefficient / 2.0;
        }
    }

    // Pure Neumann: pin one node, fix the constant afterwards.
    let pure_neumann = !fixed.iter().zip(&in_domain).any(|(f, &d)| d && f.is_some());
    let mut pinned = None;
    if pure_neumann {
        let total: f64 = (0..n_nodes).filter(|&i| in_domain[i]).map(|i| load[i]).sum();
        let scale: f64 = (0..n_nodes).filter(|&i| in_domain[i]).map(|i| load[i].abs()).sum();
        if spec.neutralize {
            let area: f64 = (0..mesh.num_triangles()).filter(|&t| include[t]).map(|t| mesh.area(t)).sum();
            for t in (0..mesh.num_triangles()).filter(|&t| include[t]) {
                for node in mesh.triangle(t).nodes {
                    load[node] -= total * mesh.area(t) / area / 3.0;
                }
            }
        } else if total.abs() > NEUTRALITY_TOLERANCE * scale + 1e3 * f64::MIN_POSITIVE {
            return Err(Error::Compatibility { residual: total, tolerance: NEUTRALITY_TOLERANCE * scale });
        }
        let node = reference_node(mesh, spec.reference)?;
        fixed[node] = Some(0.0);
        pinned = Some(node);
    }

    let stiffness = assemble_stiffness(mesh, eps0, &include);
    let mut unknown_of = vec![usize::MAX; n_nodes];
    let mut unknowns = Vec::new();
    for i in (0..n_nodes).filter(|&i| in_domain[i] && fixed[i].is_none()) {
        unknown_of[i] = unknowns.len();
        unknowns.push(i);
    }
    let mut triplets = Vec::with_capacity(stiffness.nnz());
    let mut rhs: Vec<f64> = unknowns.iter().map(|&i| load[i]).collect();
    for (row, &i) in unknowns.iter().enumerate() {
        let (cols, vals) = stiffness.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            match fixed[j] {
                Some(value) => rhs[row] -= v * value,
                None => triplets.push((row, unknown_of[j], v)),
            }
        }
    }
    let system = SparseMatrix::from_triplets(unknowns.len(), unknowns.len(), &triplets);
    let assembly_time = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let (x, iterations, relative_residual) = if unknowns.is_empty() {
        (Vec::new(), 0, 0.0)
    } else {
        let out = gmres(&system, &rhs, None, &spec.gmres)?.require_converged()?;
        (out.x, out.iterations, out.relative_residual)
    };
    let solve_time = start.elapsed().as_secs_f64();

    let mut nodal: Vec<f64> = (0..n_nodes).map(|i| fixed[i].unwrap_or(0.0)).collect();
    for (k, &i) in unknowns.iter().enumerate() {
        nodal[i] = x[k];
    }
    if let Some(node) = pinned {
        let shift = match spec.reference {
            Reference::Point(_, v) => v - nodal[node],
            Reference::Triangle(t, v) => v - triangle_mean(mesh, &nodal, t),
        };
        nodal.iter_mut().for_each(|p| *p += shift);
    }
    Ok(FemSolution { nodal, iterations, relative_residual, unknowns: unknowns.len(), assembly_time, solve_time })
}

fn reference_node(mesh: &Mesh, reference: Reference) -> Result<usize> {
    let target = match reference {
        Reference::Point(p, _) => p,
        Reference::Triangle(t, _) => {
            if t >= mesh.num_triangles() {
                return Err(Error::Config(format!("reference triangle {t} does not exist")));
            }
            return Ok(mesh.triangle(t).nodes[0]);
        }
    };
    Ok((0..mesh.num_nodes())
        .min_by(|&a, &b| (mesh.node(a) - target).norm().total_cmp(&(mesh.node(b) - target).norm()))
        .expect("mesh has nodes"))
}

fn triangle_mean(mesh: &Mesh, nodal: &[f64], t: usize) -> f64 {
    mesh.triangle(t).nodes.iter().map(|&n| nodal[n]).sum::<f64>() / 3.0
}

/// Mean of the three vertex values on every triangle (the exact average of
/// the P1 interpolant).
pub fn fem_to_triangle_average(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    (0..mesh.num_triangles()).map(|t| triangle_mean(mesh, nodal, t)).collect()
}

/// `∇φ` of the P1 interpolant on triangle `t`.
pub fn fem_gradient(mesh: &Mesh, nodal: &[f64], t: usize) -> Point2 {
    let nodes = mesh.triangle(t).nodes;
    (0..3).fold(Point2::ORIGIN, |acc, k| acc + mesh.hat_gradient(t, k) * nodal[nodes[k]])
}

/// `D = −ε ∇φ` of the P1 interpolant on triangle `t`.
pub fn fem_flux(mesh: &Mesh, nodal: &[f64], t: usize, eps0: f64) -> Point2 {
    fem_gradient(mesh, nodal, t) * (-eps0 * mesh.eps_r(t))
}
