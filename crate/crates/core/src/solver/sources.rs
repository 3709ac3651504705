use serde::{Deserialize, Serialize};

use super::Discretization;
use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::mesh::{Mesh, Point2};

/// `q_T = ρ(c_T) · A_T` for a charge density `ρ`.
pub fn density_charges(mesh: &Mesh, rho: &ScalarFn) -> Result<Vec<f64>> {
    (0..mesh.num_triangles())
        .map(|t| {
            let q = rho.eval(mesh.centroid(t)) * mesh.area(t);
            if q.is_finite() {
                Ok(q)
            } else {
                Err(Error::NonFinite("charge density"))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum DeltaMode {
    /// Whole charge on the triangle containing the point.
    Concentrated,
    /// Uniform density over a square window of the given side, assigned to
    /// triangles whose centroid lies inside it.
    Smoothed { side: f64 },
}

/// Per-triangle charges `(triangle, q)` representing a point charge `total`
/// at `point`.
///
/// The smoothed form rescales its contributions so they sum to `total`
/// exactly; if no centroid falls in the window it degrades to the
/// concentrated form.
pub fn delta_source(disc: &Discretization, point: Point2, total: f64, mode: DeltaMode) -> Result<Vec<(usize, f64)>> {
    let home = disc.locate(point)?;
    let DeltaMode::Smoothed { side } = mode else {
        return Ok(vec![(home, total)]);
    };
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::Config(format!("smoothing window side must be positive, got {side}")));
    }
    let mesh = disc.mesh();
    let half = side / 2.0;
    let density = total / (side * side);
    let mut out: Vec<(usize, f64)> = (0..mesh.num_triangles())
        .filter(|&t| {
            let c = mesh.centroid(t);
            (c.x - point.x).abs() < half && (c.y - point.y).abs() < half
        })
        .map(|t| (t, density * mesh.area(t)))
        .collect();
    let raw: f64 = out.iter().map(|&(_, q)| q).sum();
    if out.is_empty() || raw == 0.0 {
        return Ok(vec![(home, total)]);
    }
    let scale = total / raw;
    out.iter_mut().for_each(|(_, q)| *q *= scale);
    Ok(out)
}
