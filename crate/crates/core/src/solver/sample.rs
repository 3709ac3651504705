use super::{Discretization, Solution};
use crate::error::Result;
use crate::mesh::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub point: Point2,
    pub triangle: usize,
    pub potential: f64,
    pub flux: Point2,
    pub field: Point2,
}

/// A sample on a polyline, with its arc length from the start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSample {
    pub arc_length: f64,
    pub sample: FieldSample,
}

impl Solution {
    /// Values on triangle `t` at `p`; `p` is not checked against `t`.
    pub fn sample_on(&self, disc: &Discretization, t: usize, p: Point2) -> FieldSample {
        let flux = self.flux.eval(disc.mesh(), t, p);
        FieldSample { point: p, triangle: t, potential: self.potential[t], flux, field: flux * (1.0 / disc.permittivity(t)) }
    }

    pub fn sample(&self, disc: &Discretization, p: Point2) -> Result<FieldSample> {
        Ok(self.sample_on(disc, disc.locate(p)?, p))
    }

    /// One result per point; points outside the mesh fail individually.
    pub fn sample_points(&self, disc: &Discretization, points: &[Point2]) -> Vec<Result<FieldSample>> {
        points.iter().map(|&p| self.sample(disc, p)).collect()
    }

    /// Samples at every triangle centroid.
    pub fn centroid_samples(&self, disc: &Discretization) -> Vec<FieldSample> {
        (0..disc.mesh().num_triangles()).map(|t| self.sample_on(disc, t, disc.mesh().centroid(t))).collect()
    }

    /// `count` equal steps per segment of the polyline, shared vertices
    /// included once.
    pub fn sample_polyline(&self, disc: &Discretization, vertices: &[Point2], count: usize) -> Result<Vec<LineSample>> {
        let mut out = Vec::new();
        let mut base = 0.0;
        for (seg, pair) in vertices.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let len = (b - a).norm();
            let steps = count.max(1);
            let first = if seg == 0 { 0 } else { 1 };
            for i in first..=steps {
                let s = i as f64 / steps as f64;
                let p = a + (b - a) * s;
                out.push(LineSample { arc_length: base + s * len, sample: self.sample(disc, p)? });
            }
            base += len;
        }
        Ok(out)
    }
}
