//! Triangle meshes: storage, validation, text I/O, structured generation
//! and edge/dual-graph topology.

mod generate;
mod io;
mod locate;
mod topology;

use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub use generate::{generate_masked_grid, generate_structured_square, CellSpec, GridSpec};
pub use io::{load_mesh, write_mesh};
pub use locate::PointLocator;
pub use topology::{build_topology, BoundaryEdge, EdgeRef, EdgeTopology, InteriorEdge};

/// Marker given to boundary edges that the mesh file does not label.
pub const DEFAULT_MARKER: &str = "boundary";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Signed area of the triangle (a, b, c); positive when counter-clockwise.
pub fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    /// Node indices in counter-clockwise order.
    pub nodes: [usize; 3],
    /// Relative permittivity, constant over the triangle.
    pub eps_r: f64,
    /// 0 for the physical domain; other tags mark auxiliary regions.
    pub region: u32,
}

impl Triangle {
    pub fn new(nodes: [usize; 3], eps_r: f64, region: u32) -> Self {
        Self { nodes, eps_r, region }
    }

    /// Node pair of the edge opposite local vertex `k`, in CCW order.
    pub fn edge_nodes(&self, k: usize) -> [usize; 2] {
        [self.nodes[(k + 1) % 3], self.nodes[(k + 2) % 3]]
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A validated triangle mesh. Immutable once constructed.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point2>,
    triangles: Vec<Triangle>,
    boundary_markers: BTreeMap<(usize, usize), String>,
    areas: Vec<f64>,
    centroids: Vec<Point2>,
}

impl Mesh {
    /// Validates and normalizes a mesh.
    ///
    /// Clockwise triangles are reordered to counter-clockwise. Marker keys
    /// may be given in either node order.
    pub fn new(
        nodes: Vec<Point2>,
        mut triangles: Vec<Triangle>,
        markers: impl IntoIterator<Item = ((usize, usize), String)>,
    ) -> Result<Self> {
        if let Some(i) = nodes.iter().position(|p| !p.is_finite()) {
            return Err(Error::Geometry(format!("node {i} has non-finite coordinates")));
        }
        if triangles.is_empty() {
            return Err(Error::Geometry("mesh has no triangles".into()));
        }

        let mut areas = Vec::with_capacity(triangles.len());
        let mut centroids = Vec::with_capacity(triangles.len());
        let mut edge_count: HashMap<(usize, usize), u32> = HashMap::with_capacity(triangles.len() * 2);
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &n in &tri.nodes {
                if n >= nodes.len() {
                    return Err(Error::Geometry(format!(
                        "triangle {t} references node {n}, but only {} nodes exist",
                        nodes.len()
                    )));
                }
            }
            let [a, b, c] = tri.nodes;
            if a == b || b == c || a == c {
                return Err(Error::Geometry(format!("triangle {t} repeats a node")));
            }
            if !(tri.eps_r > 0.0 && tri.eps_r.is_finite()) {
                return Err(Error::Geometry(format!(
                    "triangle {t} has non-positive permittivity {}",
                    tri.eps_r
                )));
            }
            let mut area = signed_area(nodes[a], nodes[b], nodes[c]);
            if area < 0.0 {
                tri.nodes.swap(1, 2);
                area = -area;
            }
            if area == 0.0 || !area.is_finite() {
                return Err(Error::Geometry(format!("triangle {t} has zero area")));
            }
            areas.push(area);
            let [a, b, c] = tri.nodes;
            centroids.push((nodes[a] + nodes[b] + nodes[c]) * (1.0 / 3.0));
            for k in 0..3 {
                let [p, q] = tri.edge_nodes(k);
                let count = edge_count.entry(edge_key(p, q)).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(Error::Topology(format!(
                        "edge ({p}, {q}) is shared by more than two triangles"
                    )));
                }
            }
        }

        let mut boundary_markers = BTreeMap::new();
        for ((a, b), marker) in markers {
            let key = edge_key(a, b);
            match edge_count.get(&key) {
                Some(1) => {}
                Some(_) => {
                    return Err(Error::Topology(format!(
                        "marker '{marker}' is attached to interior edge ({a}, {b})"
                    )))
                }
                None => {
                    return Err(Error::Topology(format!(
                        "marker '{marker}' is attached to ({a}, {b}), which is not a mesh edge"
                    )))
                }
            }
            boundary_markers.insert(key, marker);
        }
        for (key, count) in &edge_count {
            if *count == 1 {
                boundary_markers.entry(*key).or_insert_with(|| DEFAULT_MARKER.to_string());
            }
        }

        Ok(Self { nodes, triangles, boundary_markers, areas, centroids })
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn node(&self, i: usize) -> Point2 {
        self.nodes[i]
    }

    pub fn triangle(&self, t: usize) -> &Triangle {
        &self.triangles[t]
    }

    pub fn vertices(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t].nodes;
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        self.centroids[t]
    }

    pub fn centroids(&self) -> &[Point2] {
        &self.centroids
    }

    pub fn eps_r(&self, t: usize) -> f64 {
        self.triangles[t].eps_r
    }

    pub fn region(&self, t: usize) -> u32 {
        self.triangles[t].region
    }

    /// Boundary edges keyed by sorted node pair.
    pub fn boundary_markers(&self) -> &BTreeMap<(usize, usize), String> {
        &self.boundary_markers
    }

    pub fn marker(&self, a: usize, b: usize) -> Option<&str> {
        self.boundary_markers.get(&edge_key(a, b)).map(String::as_str)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Gradient of the linear hat function of local vertex `k` on triangle `t`.
    pub fn hat_gradient(&self, t: usize, k: usize) -> Point2 {
        let v = self.vertices(t);
        let opposite = v[(k + 2) % 3] - v[(k + 1) % 3];
        opposite.perp() * (1.0 / (2.0 * self.areas[t]))
    }

    /// Local index of `node` in triangle `t`.
    pub fn local_index(&self, t: usize, node: usize) -> Option<usize> {
        self.triangles[t].nodes.iter().position(|&n| n == node)
    }

    /// Area-weighted second moment about the centroid, `∫_T |r − c|² dA`.
    pub fn polar_moment(&self, t: usize) -> f64 {
        let c = self.centroids[t];
        let s: f64 = self.vertices(t).iter().map(|&v| (v - c).norm_squared()).sum();
        self.areas[t] * s / 12.0
    }

    /// Same mesh with every triangle's permittivity replaced.
    pub fn with_permittivity(&self, eps_r: impl Fn(usize, &Triangle) -> f64) -> Result<Mesh> {
        let triangles = self
            .triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| Triangle { eps_r: eps_r(t, tri), ..*tri })
            .collect();
        Mesh::new(self.nodes.clone(), triangles, self.boundary_markers.clone())
    }

    /// Cheap content hash covering geometry, permittivities and region tags.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.nodes.len().hash(&mut h);
        for p in &self.nodes {
            p.x.to_bits().hash(&mut h);
            p.y.to_bits().hash(&mut h);
        }
        for tri in &self.triangles {
            tri.nodes.hash(&mut h);
            tri.eps_r.to_bits().hash(&mut h);
            tri.region.hash(&mut h);
        }
        h.finish()
    }
}
