use super::{Mesh, Point2};
use crate::error::{Error, Result};

/// Bucket grid over triangle bounding boxes for point location.
#[derive(Debug, Clone)]
pub struct PointLocator {
    min: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<usize>,
    items: Vec<usize>,
}

const EDGE_TOL: f64 = 1e-12;

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let (mut min, mut max) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
        for p in mesh.nodes() {
            min = Point2::new(min.x.min(p.x), min.y.min(p.y));
            max = Point2::new(max.x.max(p.x), max.y.max(p.y));
        }
        let span = (max.x - min.x).max(max.y - min.y).max(f64::MIN_POSITIVE);
        let target = (mesh.num_triangles() as f64).sqrt().ceil().max(1.0);
        let cell = span / target;
        let nx = (((max.x - min.x) / cell).floor() as usize + 1).max(1);
        let ny = (((max.y - min.y) / cell).floor() as usize + 1).max(1);

        let bucket_range = |t: usize| {
            let v = mesh.vertices(t);
            let lo = Point2::new(v[0].x.min(v[1].x).min(v[2].x), v[0].y.min(v[1].y).min(v[2].y));
            let hi = Point2::new(v[0].x.max(v[1].x).max(v[2].x), v[0].y.max(v[1].y).max(v[2].y));
            let ix = |x: f64| (((x - min.x) / cell).floor().max(0.0) as usize).min(nx - 1);
            let iy = |y: f64| (((y - min.y) / cell).floor().max(0.0) as usize).min(ny - 1);
            (ix(lo.x), ix(hi.x), iy(lo.y), iy(hi.y))
        };

        let mut counts = vec![0usize; nx * ny + 1];
        for t in 0..mesh.num_triangles() {
            let (x0, x1, y0, y1) = bucket_range(t);
            for j in y0..=y1 {
                for i in x0..=x1 {
                    counts[j * nx + i + 1] += 1;
                }
            }
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; counts[nx * ny]];
        for t in 0..mesh.num_triangles() {
            let (x0, x1, y0, y1) = bucket_range(t);
            for j in y0..=y1 {
                for i in x0..=x1 {
                    let b = j * nx + i;
                    items[fill[b]] = t;
                    fill[b] += 1;
                }
            }
        }
        Self { min, cell, nx, ny, offsets: counts, items }
    }

    /// Lowest-indexed triangle containing `p` (closed triangles, with a
    /// small relative tolerance so points on edges are found).
    pub fn locate(&self, mesh: &Mesh, p: Point2) -> Result<usize> {
        let outside = || Error::OutsideMesh { x: p.x, y: p.y };
        if !p.is_finite() {
            return Err(outside());
        }
        let fx = ((p.x - self.min.x) / self.cell).floor();
        let fy = ((p.y - self.min.y) / self.cell).floor();
        let (i, j) = match (fx, fy) {
            (x, y) if x >= -1.0 && y >= -1.0 && x <= self.nx as f64 && y <= self.ny as f64 => {
                ((x.max(0.0) as usize).min(self.nx - 1), (y.max(0.0) as usize).min(self.ny - 1))
            }
            _ => return Err(outside()),
        };
        let b = j * self.nx + i;
        self.items[self.offsets[b]..self.offsets[b + 1]]
            .iter()
            .copied()
            .filter(|&t| contains(mesh, t, p))
            .min()
            .ok_or_else(outside)
    }
}

fn contains(mesh: &Mesh, t: usize, p: Point2) -> bool {
    let [a, b, c] = mesh.vertices(t);
    let scale = 2.0 * mesh.area(t);
    let l0 = (b - p).cross(c - p) / scale;
    let l1 = (c - p).cross(a - p) / scale;
    let l2 = (a - p).cross(b - p) / scale;
    l0 >= -EDGE_TOL && l1 >= -EDGE_TOL && l2 >= -EDGE_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured_square;

    #[test]
    fn finds_containing_triangle() {
        let m = generate_structured_square(8, |_| 1.0);
        let loc = PointLocator::new(&m);
        for t in 0..m.num_triangles() {
            assert_eq!(loc.locate(&m, m.centroid(t)).unwrap(), t);
        }
        assert!(loc.locate(&m, Point2::new(0.0, 0.0)).is_ok());
        assert!(loc.locate(&m, Point2::new(1.0, 1.0)).is_ok());
    }

    #[test]
    fn rejects_outside_points() {
        let m = generate_structured_square(4, |_| 1.0);
        let loc = PointLocator::new(&m);
        for p in [Point2::new(-0.1, 0.5), Point2::new(0.5, 1.2), Point2::new(5.0, 5.0)] {
            assert!(matches!(loc.locate(&m, p), Err(Error::OutsideMesh { .. })));
        }
    }
}
