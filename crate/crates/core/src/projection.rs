//! Loop-space projection: removes the solenoidal part of `D/ε` that the
//! tree solve leaves behind by enforcing `⟨L_i, E⟩ = 0` for every loop.
//!
//! All integrals are closed form. Loop functions are constant per triangle,
//! so the Gram entries are one-point exact, and the RWG moment over a
//! triangle is `±(c − p)/2`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{loop_vector, HalfRwg, LoopTreeBasis};
use crate::error::Result;
use crate::linalg::{gmres, GmresConfig, SparseMatrix};
use crate::mesh::{EdgeRef, EdgeTopology, Mesh, Point2};

/// `G_ij = ⟨L_i, L_j / ε⟩` over interior-node loops.
#[derive(Debug, Clone)]
pub struct LoopGram {
    matrix: SparseMatrix,
}

impl LoopGram {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `R_ij = ⟨L_i, T_j / ε⟩`, split into tree RWG columns and unit-coefficient
/// half-RWG columns.
#[derive(Debug, Clone)]
pub struct LoopTreeCoupling {
    tree: Arc<SparseMatrix>,
    half: SparseMatrix,
}

impl LoopTreeCoupling {
    /// Same tree part, half-RWG columns rebuilt for another boundary data set.
    pub fn with_half_rwgs(&self, mesh: &Mesh, basis: &LoopTreeBasis, halves: &[HalfRwg], eps0: f64) -> Self {
        Self { tree: Arc::clone(&self.tree), half: half_coupling(mesh, basis, halves, eps0) }
    }

    pub fn tree(&self) -> &SparseMatrix {
        &self.tree
    }

    pub fn half(&self) -> &SparseMatrix {
        &self.half
    }

    /// `R_t t + R_h h`.
    pub fn apply(&self, tree_coeffs: &[f64], half_coeffs: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.tree.spmv(tree_coeffs)?;
        if self.half.ncols() != half_coeffs.len() {
            return Err(crate::Error::Dimension {
                context: "half-RWG coupling",
                expected: self.half.ncols(),
                got: half_coeffs.len(),
            });
        }
        self.half.spmv_add(half_coeffs, &mut y);
        Ok(y)
    }
}

/// Loop indices and vectors present on triangle `t`.
fn local_loops(mesh: &Mesh, basis: &LoopTreeBasis, t: usize) -> Vec<(usize, Point2)> {
    let nodes = mesh.triangle(t).nodes;
    (0..3).filter_map(|k| basis.loop_of_node(nodes[k]).map(|l| (l, loop_vector(mesh, t, k)))).collect()
}

/// `ε = ε₀ ε_r` on triangle `t`.
fn permittivity(mesh: &Mesh, t: usize, eps0: f64) -> f64 {
    eps0 * mesh.eps_r(t)
}

pub fn assemble_loop_gram(mesh: &Mesh, basis: &LoopTreeBasis, eps0: f64) -> LoopGram {
    let n = basis.num_loops();
    let triplets: Vec<(usize, usize, f64)> = (0..mesh.num_triangles())
        .into_par_iter()
        .flat_map_iter(|t| {
            let w = mesh.area(t) / permittivity(mesh, t, eps0);
            let local = local_loops(mesh, basis, t);
            let mut out = Vec::with_capacity(local.len() * local.len());
            for &(i, vi) in &local {
                for &(j, vj) in &local {
                    out.push((i, j, w * vi.dot(vj)));
                }
            }
            out
        })
        .collect();
    LoopGram { matrix: SparseMatrix::from_triplets(n, n, &triplets) }
}

pub fn assemble_loop_tree_coupling(mesh: &Mesh, topo: &EdgeTopology, basis: &LoopTreeBasis, eps0: f64) -> LoopTreeCoupling {
    let n_l = basis.num_loops();
    let triplets: Vec<(usize, usize, f64)> = (0..mesh.num_triangles())
        .into_par_iter()
        .flat_map_iter(|t| {
            let local = local_loops(mesh, basis, t);
            let mut out = Vec::new();
            if local.is_empty() {
                return out;
            }
            let inv_eps = 1.0 / permittivity(mesh, t, eps0);
            let c = mesh.centroid(t);
            let nodes = mesh.triangle(t).nodes;
            for (k, edge) in topo.triangle_edges(t).into_iter().enumerate() {
                let EdgeRef::Interior(e) = edge else { continue };
                let Some(pos) = basis.tree_position(e) else { continue };
                let sign = if topo.interior_edge(e).plus == t { 1.0 } else { -1.0 };
                let moment = (c - mesh.node(nodes[k])) * (0.5 * sign);
                for &(l, v) in &local {
                    out.push((l, pos, inv_eps * v.dot(moment)));
                }
            }
            out
        })
        .collect();
    let tree = Arc::new(SparseMatrix::from_triplets(n_l, basis.num_tree(), &triplets));
    LoopTreeCoupling { tree, half: half_coupling(mesh, basis, basis.half_rwgs(), eps0) }
}

fn half_coupling(mesh: &Mesh, basis: &LoopTreeBasis, halves: &[HalfRwg], eps0: f64) -> SparseMatrix {
    let mut half_triplets = Vec::new();
    for (h, half) in halves.iter().enumerate() {
        let t = half.triangle;
        let inv_eps = 1.0 / permittivity(mesh, t, eps0);
        let moment = (mesh.centroid(t) - mesh.node(half.opposite)) * 0.5;
        for (l, v) in local_loops(mesh, basis, t) {
            half_triplets.push((l, h, inv_eps * v.dot(moment)));
        }
    }
    SparseMatrix::from_triplets(basis.num_loops(), halves.len(), &half_triplets)
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub loop_coeffs: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    /// `‖R_t t + R_h h‖`, the scale of the loop pollution being removed.
    pub pollution_norm: f64,
}

/// Solves `G l = −(R_t t + R_h h)` with unpreconditioned GMRES.
pub fn project_out_loops(
    gram: &LoopGram,
    coupling: &LoopTreeCoupling,
    tree_coeffs: &[f64],
    half_coeffs: &[f64],
    cfg: &GmresConfig,
) -> Result<Projection> {
    let mut rhs = coupling.apply(tree_coeffs, half_coeffs)?;
    rhs.iter_mut().for_each(|v| *v = -*v);
    let pollution_norm = crate::linalg::norm2(&rhs);
    if gram.dim() == 0 {
        return Ok(Projection { loop_coeffs: Vec::new(), iterations: 0, relative_residual: 0.0, pollution_norm });
    }
    let out = gmres(gram.matrix(), &rhs, None, cfg)?.require_converged()?;
    Ok(Projection {
        loop_coeffs: out.x,
        iterations: out.iterations,
        relative_residual: out.relative_residual,
        pollution_norm,
    })
}

/// `⟨L_i, E⟩ = G l + R_t t + R_h h` for every loop.
pub fn loop_inner_products(
    gram: &LoopGram,
    coupling: &LoopTreeCoupling,
    loop_coeffs: &[f64],
    tree_coeffs: &[f64],
    half_coeffs: &[f64],
) -> Result<Vec<f64>> {
    let mut y = coupling.apply(tree_coeffs, half_coeffs)?;
    if loop_coeffs.len() != gram.dim() {
        return Err(crate::Error::Dimension { context: "loop coefficients", expected: gram.dim(), got: loop_coeffs.len() });
    }
    gram.matrix().spmv_add(loop_coeffs, &mut y);
    Ok(y)
}
