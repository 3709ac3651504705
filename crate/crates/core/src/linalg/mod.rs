//! Sparse storage and the unpreconditioned restarted GMRES used by both the
//! loop projection and the finite-element baseline.

mod csr;
mod gmres;

pub use csr::SparseMatrix;
pub use gmres::{gmres, GmresConfig, GmresOutcome, LinearOperator};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
