//! Fixtures shared by the benchmarks.

use ltpoisson_core::problems::Family;
use ltpoisson_core::{Discretization, ProblemSpec};

/// Mesh resolutions swept by the benchmarks.
pub const SIZES: [usize; 4] = [32, 64, 128, 256];

pub fn fixture(family: Family, n: usize, tol: f64) -> (Discretization, ProblemSpec) {
    let (disc, mut spec) = family.build(n, 1.0).expect("built-in family");
    spec.gmres.rel_tolerance = tol;
    (disc, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_solve() {
        let (disc, spec) = fixture(Family::Square, 8, 1e-6);
        assert!(ltpoisson_core::scaling::solve_pps(&disc, &spec).is_ok());
    }
}
