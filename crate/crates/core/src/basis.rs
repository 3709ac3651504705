//! Pulse, RWG, loop, tree and boundary half-RWG function sets.
//!
//! RWG functions are normalized so that each carries unit total flux across
//! its defining edge: on a support triangle with area `A` and opposite
//! vertex `p` the value is `±(r − p) / (2A)` and the divergence `±1/A`.
//! Loop functions are the rotated gradients `(∂Δ/∂y, −∂Δ/∂x)` of the nodal
//! hat function `Δ` of an interior node, constant on every triangle.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::mesh::{EdgeTopology, Mesh, Point2};

/// Value of a plus-oriented RWG half on triangle `t` with opposite node `opposite`.
pub fn rwg_value(mesh: &Mesh, t: usize, opposite: usize, r: Point2) -> Point2 {
    (r - mesh.node(opposite)) * (1.0 / (2.0 * mesh.area(t)))
}

/// `∫_T (r − p) / (2A) dA = (c − p) / 2` for a plus-oriented RWG half.
pub fn rwg_integral(mesh: &Mesh, t: usize, opposite: usize) -> Point2 {
    (mesh.centroid(t) - mesh.node(opposite)) * 0.5
}

/// Divergence-free function circulating around one interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopFunction {
    node: usize,
    support: Vec<(usize, Point2)>,
}

impl LoopFunction {
    pub fn node(&self) -> usize {
        self.node
    }

    /// Support triangles with the constant vector value on each.
    pub fn support(&self) -> &[(usize, Point2)] {
        &self.support
    }

    pub fn vector_on(&self, t: usize) -> Option<Point2> {
        self.support.iter().find(|(s, _)| *s == t).map(|&(_, v)| v)
    }
}

/// Constant value of `loop_fn` on triangle `t`, computed from the vertex
/// coordinates.
pub fn loop_vector_on_triangle(mesh: &Mesh, loop_fn: &LoopFunction, t: usize) -> Result<Point2> {
    if t >= mesh.num_triangles() {
        return Err(Error::Topology(format!("triangle {t} does not exist")));
    }
    let k = mesh.local_index(t, loop_fn.node).ok_or_else(|| {
        Error::Topology(format!("triangle {t} is outside the support of the loop at node {}", loop_fn.node))
    })?;
    Ok(loop_vector(mesh, t, k))
}

pub(crate) fn loop_vector(mesh: &Mesh, t: usize, k: usize) -> Point2 {
    let g = mesh.hat_gradient(t, k);
    Point2::new(g.y, -g.x)
}

/// Boundary RWG truncated to its single triangle; carries a prescribed flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfRwg {
    pub boundary_edge: usize,
    pub triangle: usize,
    pub opposite: usize,
    /// Total outward flux through the boundary edge.
    pub coefficient: f64,
}

/// Spanning tree of the dual graph, loop set, and Neumann half-RWGs.
#[derive(Debug, Clone)]
pub struct LoopTreeBasis {
    root: usize,
    order: Vec<usize>,
    tree: Vec<usize>,
    tree_position: Vec<Option<usize>>,
    parent_position: Vec<Option<usize>>,
    loops: Vec<LoopFunction>,
    node_loop: Vec<Option<usize>>,
    half_rwgs: Vec<HalfRwg>,
}

impl LoopTreeBasis {
    pub fn root(&self) -> usize {
        self.root
    }

    /// Triangles in breadth-first order; the root comes first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Interior edge ids of the tree RWGs. Entry `k` is the edge joining
    /// `order()[k + 1]` to its parent, so parents precede children.
    pub fn tree(&self) -> &[usize] {
        &self.tree
    }

    /// Position in [`tree`](Self::tree) of an interior edge, if it is a tree edge.
    pub fn tree_position(&self, edge: usize) -> Option<usize> {
        self.tree_position[edge]
    }

    /// Tree position of the edge linking triangle `t` to its parent.
    pub fn parent_position(&self, t: usize) -> Option<usize> {
        self.parent_position[t]
    }

    pub fn loops(&self) -> &[LoopFunction] {
        &self.loops
    }

    /// Loop index owned by `node`, if the node is interior.
    pub fn loop_of_node(&self, node: usize) -> Option<usize> {
        self.node_loop[node]
    }

    pub fn half_rwgs(&self) -> &[HalfRwg] {
        &self.half_rwgs
    }

    pub fn num_tree(&self) -> usize {
        self.tree.len()
    }

    pub fn num_loops(&self) -> usize {
        self.loops.len()
    }

    /// Replaces the half-RWG set with the one implied by Neumann data `g`.
    pub fn attach_neumann_half_rwgs(
        mut self,
        mesh: &Mesh,
        topo: &EdgeTopology,
        neumann: &BTreeMap<String, ScalarFn>,
        dirichlet_markers: &BTreeSet<String>,
        eps0: f64,
    ) -> Result<Self> {
        self.half_rwgs = neumann_half_rwgs(mesh, topo, neumann, dirichlet_markers, eps0)?;
        Ok(self)
    }
}

/// Builds the breadth-first spanning tree from `root` and one loop per
/// interior node.
pub fn build_loop_tree(mesh: &Mesh, topo: &EdgeTopology, root: usize) -> Result<LoopTreeBasis> {
    let n_tri = mesh.num_triangles();
    if root >= n_tri {
        return Err(Error::Config(format!("root triangle {root} does not exist")));
    }
    let mut parent_position = vec![None; n_tri];
    let mut tree_position = vec![None; topo.interior_edges().len()];
    let mut visited = vec![false; n_tri];
    let mut order = Vec::with_capacity(n_tri);
    let mut tree = Vec::with_capacity(n_tri.saturating_sub(1));
    let mut queue = VecDeque::from([root]);
    visited[root] = true;
    while let Some(t) = queue.pop_front() {
        order.push(t);
        for &(n, _) in topo.dual_neighbors(t) {
            if !visited[n] {
                visited[n] = true;
                queue.push_back(n);
            }
        }
    }
    if order.len() != n_tri {
        return Err(Error::Topology(format!(
            "dual graph is disconnected: {} of {n_tri} triangles reachable from the root",
            order.len()
        )));
    }
    // Second pass so that tree[k] is the parent edge of order[k + 1].
    let mut rank = vec![0usize; n_tri];
    for (i, &t) in order.iter().enumerate() {
        rank[t] = i;
    }
    for &t in order.iter().skip(1) {
        let &(_, e) = topo
            .dual_neighbors(t)
            .iter()
            .filter(|&&(n, _)| rank[n] < rank[t])
            .min_by_key(|&&(n, _)| rank[n])
            .expect("every non-root triangle has an earlier neighbour in BFS order");
        tree_position[e] = Some(tree.len());
        parent_position[t] = Some(tree.len());
        tree.push(e);
    }

    let mut node_loop = vec![None; mesh.num_nodes()];
    let mut loops = Vec::with_capacity(topo.num_interior_nodes());
    for node in topo.interior_nodes() {
        let support = topo
            .node_triangles(node)
            .iter()
            .map(|&t| {
                let k = mesh.local_index(t, node).expect("incidence lists only incident triangles");
                (t, loop_vector(mesh, t, k))
            })
            .collect();
        node_loop[node] = Some(loops.len());
        loops.push(LoopFunction { node, support });
    }

    Ok(LoopTreeBasis { root, order, tree, tree_position, parent_position, loops, node_loop, half_rwgs: Vec::new() })
}

/// Half-RWGs carrying the outward flux `−ε g ℓ` through each boundary edge
/// whose marker has Neumann data, with `g` sampled at the edge midpoint.
///
/// Edges whose flux evaluates to zero get no function. Neumann data on a
/// Dirichlet marker, or on a marker no boundary edge carries, is a
/// configuration error.
pub fn neumann_half_rwgs(
    mesh: &Mesh,
    topo: &EdgeTopology,
    neumann: &BTreeMap<String, ScalarFn>,
    dirichlet_markers: &BTreeSet<String>,
    eps0: f64,
) -> Result<Vec<HalfRwg>> {
    for marker in neumann.keys() {
        if dirichlet_markers.contains(marker) {
            return Err(Error::Config(format!("Neumann data given for Dirichlet boundary '{marker}'")));
        }
        if !topo.boundary_edges().iter().any(|e| &e.marker == marker) {
            return Err(Error::Config(format!("no boundary edge carries marker '{marker}'")));
        }
    }
    let mut out = Vec::new();
    for (id, edge) in topo.boundary_edges().iter().enumerate() {
        let Some(g) = neumann.get(&edge.marker) else { continue };
        let (a, b) = (mesh.node(edge.nodes[0]), mesh.node(edge.nodes[1]));
        let value = g.eval(a.midpoint(b));
        if !value.is_finite() {
            return Err(Error::NonFinite("Neumann boundary data"));
        }
        let coefficient = -eps0 * mesh.eps_r(edge.triangle) * value * (b - a).norm();
        if coefficient != 0.0 {
            out.push(HalfRwg { boundary_edge: id, triangle: edge.triangle, opposite: edge.opposite, coefficient });
        }
    }
    Ok(out)
}

/// Net outward half-RWG flux per triangle.
pub fn boundary_flux_per_triangle(num_triangles: usize, half_rwgs: &[HalfRwg]) -> Vec<f64> {
    let mut flux = vec![0.0; num_triangles];
    for h in half_rwgs {
        flux[h.triangle] += h.coefficient;
    }
    flux
}
