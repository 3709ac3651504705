//! Divergence incidence system of the tree RWGs and its O(N) direct solves.
//!
//! Testing `∇·D = ρ` with pulses gives `K I_t = V_ρ` with
//! `K[i][j] = ∫_{T_i} ∇·T_j ∈ {+1, −1, 0}`. The root row is dropped (global
//! charge neutrality makes it redundant) and the remaining square system is
//! triangular under the breadth-first ordering, so it is solved by a single
//! leaf-to-root sweep. The potential system uses `Kᵀ` and is solved by the
//! matching root-to-leaf sweep.

use crate::basis::LoopTreeBasis;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::mesh::EdgeTopology;

/// Relative tolerance on global neutrality before the tree solve.
pub const NEUTRALITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct IncidenceSystem {
    num_triangles: usize,
    root: usize,
    /// Interior edge id of each tree position.
    edges: Vec<usize>,
    /// Triangle below each tree edge (farther from the root).
    child: Vec<usize>,
    /// Triangle above each tree edge.
    parent: Vec<usize>,
    /// `K[child][k]`: +1 when the child is the plus triangle of edge `k`.
    child_sign: Vec<f64>,
    /// Triangle at each breadth-first position; the child of edge `k` sits at `k + 1`.
    order: Vec<u32>,
    /// Breadth-first position of each edge's parent (non-decreasing).
    parent_pos: Vec<u32>,
    /// Breadth-first position of each triangle.
    position: Vec<u32>,
}

/// Signed incidence of the tree RWGs on their two triangles.
pub fn assemble_incidence(basis: &LoopTreeBasis, topo: &EdgeTopology) -> IncidenceSystem {
    let order = basis.order();
    let n_t = basis.num_tree();
    let mut child = Vec::with_capacity(n_t);
    let mut parent = Vec::with_capacity(n_t);
    let mut child_sign = Vec::with_capacity(n_t);
    for (k, &e) in basis.tree().iter().enumerate() {
        let c = order[k + 1];
        let edge = topo.interior_edge(e);
        let (p, s) = if edge.plus == c { (edge.minus, 1.0) } else { (edge.plus, -1.0) };
        child.push(c);
        parent.push(p);
        child_sign.push(s);
    }
    assert!(order.len() <= u32::MAX as usize, "mesh too large for 32-bit tree indices");
    let mut position = vec![0u32; order.len()];
    for (i, &t) in order.iter().enumerate() {
        position[t] = i as u32;
    }
    let parent_pos = parent.iter().map(|&p| position[p]).collect();
    IncidenceSystem {
        num_triangles: order.len(),
        order: order.iter().map(|&t| t as u32).collect(),
        parent_pos,
        position,
        root: basis.root(),
        edges: basis.tree().to_vec(),
        child,
        parent,
        child_sign,
    }
}

impl IncidenceSystem {
    pub fn num_triangles(&self) -> usize {
        self.num_triangles
    }

    pub fn num_tree(&self) -> usize {
        self.edges.len()
    }

    /// The dropped-row triangle.
    pub fn root(&self) -> usize {
        self.root
    }

    /// Interior edge id of tree position `k`.
    pub fn tree_edge(&self, k: usize) -> usize {
        self.edges[k]
    }

    /// (plus triangle, minus triangle) of tree position `k`.
    pub fn plus_minus(&self, k: usize) -> (usize, usize) {
        if self.child_sign[k] > 0.0 {
            (self.child[k], self.parent[k])
        } else {
            (self.parent[k], self.child[k])
        }
    }

    /// Full `N_p × N_t` incidence, or with the root row removed (rows then
    /// follow triangle order with the root skipped).
    pub fn to_sparse(&self, drop_root: bool) -> SparseMatrix {
        let row_of = |t: usize| -> Option<usize> {
            match (drop_root, t.cmp(&self.root)) {
                (true, std::cmp::Ordering::Equal) => None,
                (true, std::cmp::Ordering::Greater) => Some(t - 1),
                _ => Some(t),
            }
        };
        let mut triplets = Vec::with_capacity(2 * self.num_tree());
        for k in 0..self.num_tree() {
            let (p, m) = self.plus_minus(k);
            if let Some(r) = row_of(p) {
                triplets.push((r, k, 1.0));
            }
            if let Some(r) = row_of(m) {
                triplets.push((r, k, -1.0));
            }
        }
        let rows = if drop_root { self.num_triangles - 1 } else { self.num_triangles };
        SparseMatrix::from_triplets(rows, self.num_tree(), &triplets)
    }

    /// Solves `Σ_j K[i][j] t_j = q_i − f_i` for every non-root triangle,
    /// where `q` is the charge and `f` the known outward half-RWG flux per
    /// triangle. Fails if `Σ q − Σ f` violates neutrality, since the dropped
    /// root row would then be inconsistent.
    pub fn solve_tree(&self, charges: &[f64], boundary_flux: &[f64]) -> Result<Vec<f64>> {
        let mut t = vec![0.0; self.num_tree()];
        self.solve_tree_into(charges, boundary_flux, &mut t, &mut Vec::new())?;
        Ok(t)
    }

    /// [`solve_tree`](Self::solve_tree) into a caller buffer; `scratch` is
    /// reused for the running net charge.
    pub fn solve_tree_into(&self, charges: &[f64], boundary_flux: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
        let n = self.num_triangles;
        for (len, context) in [(charges.len(), "tree solve charges"), (boundary_flux.len(), "tree solve flux")] {
            if len != n {
                return Err(Error::Dimension { context, expected: n, got: len });
            }
        }
        if out.len() != self.num_tree() {
            return Err(Error::Dimension { context: "tree solve output", expected: self.num_tree(), got: out.len() });
        }
        let residual = neutrality_residual(charges, boundary_flux);
        let tolerance = neutrality_tolerance(charges, boundary_flux);
        if !residual.is_finite() {
            return Err(Error::NonFinite("tree solve right-hand side"));
        }
        if residual.abs() > tolerance {
            return Err(Error::Compatibility { residual, tolerance });
        }

        // Work in breadth-first positions so the sweep reads memory in order.
        let n = self.num_triangles;
        scratch.clear();
        scratch.extend(charges.iter().zip(boundary_flux).map(|(q, f)| q - f));
        scratch.resize(2 * n, 0.0);
        let (by_triangle, net) = scratch.split_at_mut(n);
        for (slot, &t) in net.iter_mut().zip(&self.order) {
            *slot = by_triangle[t as usize];
        }
        // Children before parents: each child's net charge leaves through its parent edge.
        for k in (0..self.num_tree()).rev() {
            let c = net[k + 1];
            out[k] = self.child_sign[k] * c;
            net[self.parent_pos[k] as usize] += c;
        }
        Ok(())
    }

    /// Solves `ν_{T⁺} − ν_{T⁻} = v_k` along every tree edge, then shifts so
    /// that triangle `reference.0` takes the value `reference.1`.
    pub fn solve_tree_transpose(&self, v_phi: &[f64], reference: (usize, f64)) -> Result<Vec<f64>> {
        let mut nu = vec![0.0; self.num_triangles];
        self.solve_tree_transpose_into(v_phi, reference, &mut nu, &mut Vec::new())?;
        Ok(nu)
    }

    /// [`solve_tree_transpose`](Self::solve_tree_transpose) into a caller
    /// buffer; `scratch` holds the values in breadth-first order.
    pub fn solve_tree_transpose_into(&self, v_phi: &[f64], reference: (usize, f64), nu: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
        if v_phi.len() != self.num_tree() {
            return Err(Error::Dimension { context: "transpose tree solve", expected: self.num_tree(), got: v_phi.len() });
        }
        if nu.len() != self.num_triangles {
            return Err(Error::Dimension { context: "transpose tree solve output", expected: self.num_triangles, got: nu.len() });
        }
        if reference.0 >= self.num_triangles {
            return Err(Error::Config(format!("reference triangle {} does not exist", reference.0)));
        }
        scratch.clear();
        scratch.resize(self.num_triangles, 0.0);
        let pos = scratch;
        for k in 0..self.num_tree() {
            pos[k + 1] = pos[self.parent_pos[k] as usize] + self.child_sign[k] * v_phi[k];
        }
        for (v, &i) in nu.iter_mut().zip(&self.position) {
            *v = pos[i as usize];
        }
        let shift = reference.1 - nu[reference.0];
        if shift != 0.0 {
            nu.iter_mut().for_each(|v| *v += shift);
        }
        Ok(())
    }
}

/// `Σ q − Σ f`: zero when charge and boundary flux balance.
pub fn neutrality_residual(charges: &[f64], boundary_flux: &[f64]) -> f64 {
    charges.iter().sum::<f64>() - boundary_flux.iter().sum::<f64>()
}

pub fn neutrality_tolerance(charges: &[f64], boundary_flux: &[f64]) -> f64 {
    let scale: f64 = charges.iter().map(|v| v.abs()).sum::<f64>() + boundary_flux.iter().map(|v| v.abs()).sum::<f64>();
    NEUTRALITY_TOLERANCE * scale + 1e3 * f64::MIN_POSITIVE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_loop_tree;
    use crate::mesh::{build_topology, generate_structured_square, Mesh, Point2, Triangle};
    use rand::{Rng, SeedableRng};

    /// T0, T1, T2 strip: e0 joins T0/T1, e1 joins T1/T2.
    fn chain() -> Mesh {
        let nodes = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 1.0),
        ];
        let tris = vec![
            Triangle::new([0, 1, 2], 1.0, 0),
            Triangle::new([1, 3, 2], 1.0, 0),
            Triangle::new([1, 4, 3], 1.0, 0),
        ];
        Mesh::new(nodes, tris, []).unwrap()
    }

    fn chain_system(root: usize) -> (Mesh, EdgeTopology, IncidenceSystem) {
        let m = chain();
        let topo = build_topology(&m).unwrap();
        let b = build_loop_tree(&m, &topo, root).unwrap();
        let inc = assemble_incidence(&b, &topo);
        (m, topo, inc)
    }

    fn position_of(inc: &IncidenceSystem, edge: usize) -> usize {
        (0..inc.num_tree()).find(|&k| inc.tree_edge(k) == edge).unwrap()
    }

    #[test]
    fn chain_edges_are_as_labelled() {
        let (_, topo, _) = chain_system(2);
        let e0 = topo.interior_edge(0);
        let e1 = topo.interior_edge(1);
        assert_eq!((e0.plus, e0.minus), (0, 1));
        assert_eq!((e1.plus, e1.minus), (1, 2));
    }

    #[test]
    fn two_triangle_incidence() {
        let m = generate_structured_square(1, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        let b = build_loop_tree(&m, &topo, 1).unwrap();
        let k = assemble_incidence(&b, &topo).to_sparse(true);
        assert_eq!(k.to_dense(), vec![vec![1.0]]);
    }

    #[test]
    fn chain_incidence_rows() {
        let (_, _, inc) = chain_system(2);
        let k = inc.to_sparse(true);
        let (p0, p1) = (position_of(&inc, 0), position_of(&inc, 1));
        assert_eq!(k.get(0, p0), 1.0);
        assert_eq!(k.get(0, p1), 0.0);
        assert_eq!(k.get(1, p0), -1.0);
        assert_eq!(k.get(1, p1), 1.0);
    }

    #[test]
    fn full_incidence_columns_sum_to_zero() {
        let m = generate_structured_square(7, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        let b = build_loop_tree(&m, &topo, 0).unwrap();
        let k = assemble_incidence(&b, &topo).to_sparse(false).transpose();
        for j in 0..k.nrows() {
            let (cols, vals) = k.row(j);
            assert_eq!(cols.len(), 2);
            assert_eq!(vals.iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn chain_back_substitution() {
        let (_, _, inc) = chain_system(2);
        let t = inc.solve_tree(&[1.0, -2.0, 1.0], &[0.0; 3]).unwrap();
        assert_eq!(t[position_of(&inc, 0)], 1.0);
        assert_eq!(t[position_of(&inc, 1)], -1.0);
    }

    #[test]
    fn two_triangle_solve() {
        let m = generate_structured_square(1, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        let b = build_loop_tree(&m, &topo, 0).unwrap();
        let inc = assemble_incidence(&b, &topo);
        assert_eq!(inc.solve_tree(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), vec![1.0]);
        assert_eq!(inc.solve_tree(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn neutrality_violation_is_a_compatibility_error() {
        let (_, _, inc) = chain_system(0);
        let err = inc.solve_tree(&[1.0, 0.0, 0.0], &[0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::Compatibility { .. }));
    }

    #[test]
    fn transpose_two_triangles() {
        let m = generate_structured_square(1, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        let b = build_loop_tree(&m, &topo, 0).unwrap();
        let inc = assemble_incidence(&b, &topo);
        assert_eq!(inc.solve_tree_transpose(&[0.5], (1, 0.0)).unwrap(), vec![0.5, 0.0]);
    }

    #[test]
    fn transpose_chain_is_cumulative() {
        let (_, _, inc) = chain_system(2);
        let (a, b) = (0.3, -1.25);
        let mut v = vec![0.0; 2];
        v[position_of(&inc, 0)] = a;
        v[position_of(&inc, 1)] = b;
        let nu = inc.solve_tree_transpose(&v, (2, 0.0)).unwrap();
        assert_eq!(nu, vec![a + b, b, 0.0]);
    }

    #[test]
    fn transpose_of_zero_is_the_reference_constant() {
        let m = generate_structured_square(4, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        let b = build_loop_tree(&m, &topo, 0).unwrap();
        let inc = assemble_incidence(&b, &topo);
        let nu = inc.solve_tree_transpose(&vec![0.0; inc.num_tree()], (5, 2.5)).unwrap();
        assert!(nu.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn random_charges_reproduced_on_every_row() {
        let m = generate_structured_square(12, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for root in [0, 100, 287] {
            let b = build_loop_tree(&m, &topo, root).unwrap();
            let inc = assemble_incidence(&b, &topo);
            let mut q: Vec<f64> = (0..m.num_triangles()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut f: Vec<f64> = vec![0.0; m.num_triangles()];
            f[3] = 0.25;
            f[40] = -0.75;
            let excess = q.iter().sum::<f64>() - f.iter().sum::<f64>();
            q[7] -= excess;
            let t = inc.solve_tree(&q, &f).unwrap();
            let div = inc.to_sparse(false).spmv(&t).unwrap();
            let scale = q.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for i in 0..m.num_triangles() {
                assert!((div[i] + f[i] - q[i]).abs() <= 1e-12 * scale, "row {i}");
            }
        }
    }

    #[test]
    fn transpose_inverts_tree_gradient() {
        let m = generate_structured_square(9, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        let b = build_loop_tree(&m, &topo, 0).unwrap();
        let inc = assemble_incidence(&b, &topo);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let phi: Vec<f64> = (0..m.num_triangles()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let grad: Vec<f64> = (0..inc.num_tree())
            .map(|k| {
                let (p, q) = inc.plus_minus(k);
                phi[p] - phi[q]
            })
            .collect();
        let back = inc.solve_tree_transpose(&grad, (42, phi[42])).unwrap();
        for (a, b) in back.iter().zip(&phi) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reused_buffers_give_identical_results() {
        let m = generate_structured_square(7, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        let inc = assemble_incidence(&build_loop_tree(&m, &topo, 5).unwrap(), &topo);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut q: Vec<f64> = (0..m.num_triangles()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let excess: f64 = q.iter().sum();
        q[0] -= excess;
        let f = vec![0.0; q.len()];
        let (mut out, mut nu, mut scratch) = (vec![9.0; inc.num_tree()], vec![-4.0; q.len()], vec![7.0; 3]);
        for _ in 0..2 {
            inc.solve_tree_into(&q, &f, &mut out, &mut scratch).unwrap();
            assert_eq!(out, inc.solve_tree(&q, &f).unwrap());
            inc.solve_tree_transpose_into(&out, (3, 1.5), &mut nu, &mut scratch).unwrap();
            assert_eq!(nu, inc.solve_tree_transpose(&out, (3, 1.5)).unwrap());
        }
        assert!(matches!(inc.solve_tree_into(&q, &f, &mut out[1..], &mut scratch), Err(Error::Dimension { .. })));
    }
}
