use std::collections::{HashMap, VecDeque};

use super::{edge_key, Mesh};
use crate::error::{Error, Result};

/// An edge shared by two triangles. `plus` is always the lower triangle index.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorEdge {
    /// Endpoints, counter-clockwise as seen from the plus triangle.
    pub nodes: [usize; 2],
    pub plus: usize,
    pub minus: usize,
    /// Vertex of the plus triangle opposite this edge.
    pub plus_opposite: usize,
    pub minus_opposite: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoints, counter-clockwise as seen from the owning triangle.
    pub nodes: [usize; 2],
    pub triangle: usize,
    pub opposite: usize,
    pub marker: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRef {
    Interior(usize),
    Boundary(usize),
}

/// Edge classification and adjacency of a simply connected mesh.
#[derive(Debug, Clone)]
pub struct EdgeTopology {
    interior_edges: Vec<InteriorEdge>,
    boundary_edges: Vec<BoundaryEdge>,
    triangle_edges: Vec<[EdgeRef; 3]>,
    node_is_boundary: Vec<bool>,
    num_interior_nodes: usize,
    dual_offsets: Vec<usize>,
    dual_links: Vec<(usize, usize)>,
    node_tri_offsets: Vec<usize>,
    node_tris: Vec<usize>,
}

impl EdgeTopology {
    pub fn interior_edges(&self) -> &[InteriorEdge] {
        &self.interior_edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn interior_edge(&self, e: usize) -> &InteriorEdge {
        &self.interior_edges[e]
    }

    pub fn boundary_edge(&self, e: usize) -> &BoundaryEdge {
        &self.boundary_edges[e]
    }

    /// Edges of triangle `t`; entry `k` is opposite local vertex `k`.
    pub fn triangle_edges(&self, t: usize) -> [EdgeRef; 3] {
        self.triangle_edges[t]
    }

    pub fn is_boundary_node(&self, n: usize) -> bool {
        self.node_is_boundary[n]
    }

    pub fn num_interior_nodes(&self) -> usize {
        self.num_interior_nodes
    }

    pub fn num_boundary_nodes(&self) -> usize {
        self.node_is_boundary.len() - self.num_interior_nodes
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.node_is_boundary.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i)
    }

    /// Dual-graph neighbours of triangle `t` as (triangle, interior edge).
    pub fn dual_neighbors(&self, t: usize) -> &[(usize, usize)] {
        &self.dual_links[self.dual_offsets[t]..self.dual_offsets[t + 1]]
    }

    /// Triangles incident to node `n`, in increasing index order.
    pub fn node_triangles(&self, n: usize) -> &[usize] {
        &self.node_tris[self.node_tri_offsets[n]..self.node_tri_offsets[n + 1]]
    }

    pub fn num_triangles(&self) -> usize {
        self.triangle_edges.len()
    }
}

/// Classifies edges, builds the dual graph and checks that the mesh is a
/// connected, simply connected triangulated region.
pub fn build_topology(mesh: &Mesh) -> Result<EdgeTopology> {
    let n_tri = mesh.num_triangles();
    let n_nodes = mesh.num_nodes();

    // First pass: number edges in order of first appearance.
    let mut seen: HashMap<(usize, usize), usize> = HashMap::with_capacity(n_tri * 2);
    let mut raw: Vec<(usize, usize, [usize; 2], usize, Option<(usize, usize)>)> = Vec::new();
    let mut tri_raw = vec![[0usize; 3]; n_tri];
    for t in 0..n_tri {
        let tri = mesh.triangle(t);
        for k in 0..3 {
            let [a, b] = tri.edge_nodes(k);
            let opp = tri.nodes[k];
            let id = *seen.entry(edge_key(a, b)).or_insert_with(|| {
                raw.push((t, opp, [a, b], k, None));
                raw.len() - 1
            });
            if raw[id].0 != t {
                raw[id].4 = Some((t, opp));
            }
            tri_raw[t][k] = id;
        }
    }

    let mut interior_edges = Vec::new();
    let mut boundary_edges = Vec::new();
    let mut mapping = Vec::with_capacity(raw.len());
    for (t, opp, nodes, _, other) in &raw {
        match other {
            Some((t2, opp2)) => {
                interior_edges.push(InteriorEdge {
                    nodes: *nodes,
                    plus: *t,
                    minus: *t2,
                    plus_opposite: *opp,
                    minus_opposite: *opp2,
                });
                mapping.push(EdgeRef::Interior(interior_edges.len() - 1));
            }
            None => {
                let marker = mesh
                    .marker(nodes[0], nodes[1])
                    .expect("mesh assigns a marker to every boundary edge")
                    .to_string();
                boundary_edges.push(BoundaryEdge { nodes: *nodes, triangle: *t, opposite: *opp, marker });
                mapping.push(EdgeRef::Boundary(boundary_edges.len() - 1));
            }
        }
    }
    let triangle_edges: Vec<[EdgeRef; 3]> =
        tri_raw.iter().map(|ids| [mapping[ids[0]], mapping[ids[1]], mapping[ids[2]]]).collect();

    // Node incidence.
    let mut node_tri_offsets = vec![0usize; n_nodes + 1];
    for tri in mesh.triangles() {
        for &n in &tri.nodes {
            node_tri_offsets[n + 1] += 1;
        }
    }
    if let Some(n) = (0..n_nodes).find(|&n| node_tri_offsets[n + 1] == 0) {
        return Err(Error::Topology(format!("node {n} is not referenced by any triangle")));
    }
    for n in 0..n_nodes {
        node_tri_offsets[n + 1] += node_tri_offsets[n];
    }
    let mut fill = node_tri_offsets.clone();
    let mut node_tris = vec![0usize; node_tri_offsets[n_nodes]];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &n in &tri.nodes {
            node_tris[fill[n]] = t;
            fill[n] += 1;
        }
    }

    // Boundary must be a union of simple cycles.
    let mut boundary_degree = vec![0u32; n_nodes];
    for e in &boundary_edges {
        boundary_degree[e.nodes[0]] += 1;
        boundary_degree[e.nodes[1]] += 1;
    }
    if let Some(n) = boundary_degree.iter().position(|&d| d != 0 && d != 2) {
        return Err(Error::Topology(format!(
            "node {n} touches {} boundary edges; the mesh is not a manifold with boundary",
            boundary_degree[n]
        )));
    }
    let node_is_boundary: Vec<bool> = boundary_degree.iter().map(|&d| d > 0).collect();
    let num_interior_nodes = node_is_boundary.iter().filter(|&&b| !b).count();

    // Dual graph.
    let mut dual_offsets = vec![0usize; n_tri + 1];
    for e in &interior_edges {
        dual_offsets[e.plus + 1] += 1;
        dual_offsets[e.minus + 1] += 1;
    }
    for t in 0..n_tri {
        dual_offsets[t + 1] += dual_offsets[t];
    }
    let mut fill = dual_offsets.clone();
    let mut dual_links = vec![(0usize, 0usize); dual_offsets[n_tri]];
    for (id, e) in interior_edges.iter().enumerate() {
        dual_links[fill[e.plus]] = (e.minus, id);
        fill[e.plus] += 1;
        dual_links[fill[e.minus]] = (e.plus, id);
        fill[e.minus] += 1;
    }

    let topo = EdgeTopology {
        interior_edges,
        boundary_edges,
        triangle_edges,
        node_is_boundary,
        num_interior_nodes,
        dual_offsets,
        dual_links,
        node_tri_offsets,
        node_tris,
    };

    let reached = dual_component_size(&topo, 0);
    if reached != n_tri {
        return Err(Error::Topology(format!(
            "dual graph is disconnected ({reached} of {n_tri} triangles reachable from triangle 0)"
        )));
    }
    let expected = topo.num_interior_nodes + n_tri - 1;
    if topo.interior_edges.len() != expected {
        return Err(Error::Topology(format!(
            "mesh is not simply connected: {} interior edges, expected {} interior nodes + {} triangles - 1 = {}",
            topo.interior_edges.len(),
            topo.num_interior_nodes,
            n_tri,
            expected
        )));
    }
    Ok(topo)
}

fn dual_component_size(topo: &EdgeTopology, start: usize) -> usize {
    let mut visited = vec![false; topo.num_triangles()];
    let mut queue = VecDeque::from([start]);
    visited[start] = true;
    let mut count = 1;
    while let Some(t) = queue.pop_front() {
        for &(n, _) in topo.dual_neighbors(t) {
            if !visited[n] {
                visited[n] = true;
                count += 1;
                queue.push_back(n);
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured_square, Point2, Triangle};

    pub(crate) fn fan() -> Mesh {
        let nodes = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.5, 0.5),
        ];
        let tris = (0..4).map(|k| Triangle::new([k, (k + 1) % 4, 4], 1.0, 0)).collect();
        Mesh::new(nodes, tris, []).unwrap()
    }

    #[test]
    fn split_square_counts() {
        let m = generate_structured_square(1, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        assert_eq!(topo.interior_edges().len(), 1);
        assert_eq!(topo.boundary_edges().len(), 4);
        assert_eq!(topo.num_interior_nodes(), 0);
        let e = &topo.interior_edges()[0];
        assert_eq!((e.plus, e.minus), (0, 1));
    }

    #[test]
    fn fan_satisfies_euler() {
        let topo = build_topology(&fan()).unwrap();
        assert_eq!(topo.interior_edges().len(), 4);
        assert_eq!(topo.num_interior_nodes(), 1);
        assert_eq!(topo.interior_nodes().collect::<Vec<_>>(), vec![4]);
        assert_eq!(topo.node_triangles(4), &[0, 1, 2, 3]);
    }

    #[test]
    fn structured_square_edges_match_brute_force_count() {
        let m = generate_structured_square(4, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        // Brute force: count every distinct node pair appearing in a triangle.
        let mut pairs = std::collections::BTreeMap::new();
        for t in m.triangles() {
            for k in 0..3 {
                let [a, b] = t.edge_nodes(k);
                *pairs.entry(edge_key(a, b)).or_insert(0) += 1;
            }
        }
        let interior = pairs.values().filter(|&&c| c == 2).count();
        let boundary = pairs.values().filter(|&&c| c == 1).count();
        assert_eq!(interior, 40);
        assert_eq!(boundary, 16);
        assert_eq!(topo.interior_edges().len(), interior);
        assert_eq!(topo.boundary_edges().len(), boundary);
        assert_eq!(topo.num_interior_nodes(), 9);
        assert_eq!(interior, topo.num_interior_nodes() + 32 - 1);
    }

    #[test]
    fn plus_is_lower_index_and_opposites_are_consistent() {
        let m = generate_structured_square(5, |_| 1.0);
        let topo = build_topology(&m).unwrap();
        for e in topo.interior_edges() {
            assert!(e.plus < e.minus);
            assert!(!e.nodes.contains(&e.plus_opposite));
            assert!(m.triangle(e.plus).nodes.contains(&e.plus_opposite));
            assert!(m.triangle(e.minus).nodes.contains(&e.minus_opposite));
        }
        for t in 0..m.num_triangles() {
            for (k, er) in topo.triangle_edges(t).iter().enumerate() {
                let opp = m.triangle(t).nodes[k];
                match *er {
                    EdgeRef::Interior(i) => {
                        let e = topo.interior_edge(i);
                        assert!((e.plus == t && e.plus_opposite == opp) || (e.minus == t && e.minus_opposite == opp));
                    }
                    EdgeRef::Boundary(b) => assert_eq!(topo.boundary_edge(b).opposite, opp),
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let m = generate_structured_square(6, |_| 1.0);
        let a = build_topology(&m).unwrap();
        let b = build_topology(&m).unwrap();
        assert_eq!(a.interior_edges(), b.interior_edges());
        assert_eq!(a.boundary_edges(), b.boundary_edges());
    }

    #[test]
    fn disconnected_mesh_is_rejected() {
        let nodes = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(5.0, 0.0),
            Point2::new(6.0, 0.0),
            Point2::new(5.0, 1.0),
        ];
        let tris = vec![Triangle::new([0, 1, 2], 1.0, 0), Triangle::new([3, 4, 5], 1.0, 0)];
        let m = Mesh::new(nodes, tris, []).unwrap();
        assert!(matches!(build_topology(&m).unwrap_err(), Error::Topology(_)));
    }

    #[test]
    fn annulus_is_rejected() {
        // 3x3 grid of cells with the center cell removed.
        use crate::mesh::{generate_masked_grid, CellSpec, GridSpec};
        let grid = GridSpec { origin: Point2::ORIGIN, h: 1.0, nx: 3, ny: 3 };
        let m = generate_masked_grid(
            grid,
            |c| (!(c.x == 1.5 && c.y == 1.5)).then_some(CellSpec { region: 0 }),
            |_, _| 1.0,
            |_| "wall".into(),
        )
        .unwrap();
        let err = build_topology(&m).unwrap_err();
        assert!(err.to_string().contains("simply connected"), "{err}");
    }

    #[test]
    fn pinched_vertex_is_rejected() {
        // Bow-tie: two triangles sharing only node 0.
        let nodes = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(-1.0, 0.0),
            Point2::new(-1.0, -1.0),
        ];
        let tris = vec![Triangle::new([0, 1, 2], 1.0, 0), Triangle::new([0, 3, 4], 1.0, 0)];
        let m = Mesh::new(nodes, tris, []).unwrap();
        assert!(build_topology(&m).is_err());
    }
}
