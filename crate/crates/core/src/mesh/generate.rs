use std::collections::HashMap;

use super::{edge_key, Mesh, Point2, Triangle};
use crate::error::Result;

/// A uniform grid of square cells.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub origin: Point2,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    fn corner(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.origin.x + i as f64 * self.h, self.origin.y + j as f64 * self.h)
    }
}

/// What a kept grid cell becomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSpec {
    pub region: u32,
}

/// Triangulates the cells of `grid` selected by `cell` (evaluated at cell
/// centers). Each cell is split along its lower-left to upper-right
/// diagonal. Permittivity comes from `eps` at the triangle centroid and
/// boundary markers from `marker` at the edge midpoint.
pub fn generate_masked_grid(
    grid: GridSpec,
    cell: impl Fn(Point2) -> Option<CellSpec>,
    eps: impl Fn(Point2, u32) -> f64,
    marker: impl Fn(Point2) -> String,
) -> Result<Mesh> {
    let stride = grid.nx + 1;
    let mut node_of: HashMap<usize, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut node = |i: usize, j: usize, nodes: &mut Vec<Point2>| -> usize {
        *node_of.entry(j * stride + i).or_insert_with(|| {
            nodes.push(grid.corner(i, j));
            nodes.len() - 1
        })
    };

    let mut triangles = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let center = grid.corner(i, j).midpoint(grid.corner(i + 1, j + 1));
            let Some(spec) = cell(center) else { continue };
            let ll = node(i, j, &mut nodes);
            let lr = node(i + 1, j, &mut nodes);
            let ur = node(i + 1, j + 1, &mut nodes);
            let ul = node(i, j + 1, &mut nodes);
            for tri in [[ll, lr, ur], [ll, ur, ul]] {
                let c = (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) * (1.0 / 3.0);
                triangles.push(Triangle::new(tri, eps(c, spec.region), spec.region));
            }
        }
    }

    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let [a, b] = t.edge_nodes(k);
            *count.entry(edge_key(a, b)).or_insert(0) += 1;
        }
    }
    let mut markers: Vec<((usize, usize), String)> = count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .map(|((a, b), _)| ((a, b), marker(nodes[a].midpoint(nodes[b]))))
        .collect();
    markers.sort();

    Mesh::new(nodes, triangles, markers)
}

/// Structured mesh of the unit square with `2 n²` triangles.
///
/// Boundary edges are marked `bottom`, `right`, `top` and `left`.
pub fn generate_structured_square(n: usize, eps_fn: impl Fn(Point2) -> f64) -> Mesh {
    assert!(n >= 1, "need at least one subdivision");
    let grid = GridSpec { origin: Point2::ORIGIN, h: 1.0 / n as f64, nx: n, ny: n };
    generate_masked_grid(grid, |_| Some(CellSpec { region: 0 }), |c, _| eps_fn(c), square_side_marker)
        .expect("structured square is always valid")
}

fn square_side_marker(mid: Point2) -> String {
    let tol = 1e-9;
    if mid.y < tol {
        "bottom"
    } else if mid.x > 1.0 - tol {
        "right"
    } else if mid.y > 1.0 - tol {
        "top"
    } else {
        "left"
    }
    .to_string()
}
