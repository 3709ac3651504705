use serde::{Deserialize, Serialize};

use super::{dot, norm2, SparseMatrix};
use crate::error::{Error, Result};

/// Square linear operator `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        assert_eq!(self.nrows(), self.ncols(), "GMRES needs a square matrix");
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmresConfig {
    /// Krylov subspace dimension before restarting.
    pub restart: usize,
    /// Stop when `‖b − A x‖ / ‖b‖` falls to this value.
    pub rel_tolerance: f64,
    /// Cap on the total number of inner iterations (operator applications).
    pub max_iterations: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { restart: 60, rel_tolerance: 1e-8, max_iterations: 100_000 }
    }
}

impl GmresConfig {
    pub fn with_tolerance(rel_tolerance: f64) -> Self {
        Self { rel_tolerance, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restart < 1 {
            return Err(Error::Config("GMRES restart must be at least 1".into()));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::Config(format!(
                "GMRES relative tolerance must lie in (0, 1), got {}",
                self.rel_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// Total inner iterations across all restart cycles.
    pub iterations: usize,
    /// True relative residual `‖b − A x‖ / ‖b‖` of the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    /// Relative residual estimate after every inner iteration.
    pub residual_history: Vec<f64>,
}

impl GmresOutcome {
    /// Turns a non-converged outcome into [`Error::Convergence`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Convergence { iterations: self.iterations, relative_residual: self.relative_residual })
        }
    }
}

/// Restarted GMRES(m) without preconditioning, using modified Gram-Schmidt
/// and Givens rotations.
///
/// Returns `Ok` with `converged == false` when the iteration cap is hit;
/// the best (last) iterate is returned in that case. A Krylov space that
/// becomes invariant without reducing the residual is a breakdown error.
pub fn gmres(op: &impl LinearOperator, b: &[f64], x0: Option<&[f64]>, cfg: &GmresConfig) -> Result<GmresOutcome> {
    cfg.validate()?;
    let n = op.dim();
    if b.len() != n {
        return Err(Error::Dimension { context: "gmres right-hand side", expected: n, got: b.len() });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GMRES right-hand side"));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::Dimension { context: "gmres initial guess", expected: n, got: x0.len() })
        }
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            residual_history: Vec::new(),
        });
    }

    let m = cfg.restart.min(n.max(1));
    let mut r = vec![0.0; n];
    let residual = |x: &[f64], r: &mut [f64]| {
        op.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm2(r)
    };
    let mut beta = residual(&x, &mut r);
    let mut rel = beta / b_norm;
    let mut history = Vec::new();
    let mut iterations = 0;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m + 1]; m];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];

    while rel > cfg.rel_tolerance && iterations < cfg.max_iterations {
        if basis.is_empty() {
            basis.push(vec![0.0; n]);
        }
        for (vi, ri) in basis[0].iter_mut().zip(&r) {
            *vi = ri / beta;
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;

        let mut k = 0;
        let mut invariant = false;
        for j in 0..m {
            if iterations >= cfg.max_iterations {
                break;
            }
            op.apply(&basis[j], &mut w);
            iterations += 1;
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("GMRES Krylov vector"));
            }
            let w_norm0 = norm2(&w);
            let col = &mut h[j];
            for (i, v) in basis.iter().enumerate().take(j + 1) {
                let hij = dot(&w, v);
                col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let h_next = norm2(&w);

            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(h_next);
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = col[j] / denom;
                sn[j] = h_next / denom;
            }
            col[j] = denom;
            col[j + 1] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k = j + 1;
            history.push(g[j + 1].abs() / b_norm);

            if h_next <= 1e-14 * w_norm0 {
                invariant = true;
                break;
            }
            if basis.len() <= j + 1 {
                basis.push(vec![0.0; n]);
            }
            let inv = 1.0 / h_next;
            for (vk, wk) in basis[j + 1].iter_mut().zip(&w) {
                *vk = wk * inv;
            }
            if g[j + 1].abs() / b_norm <= cfg.rel_tolerance {
                break;
            }
        }
        if k == 0 {
            break;
        }

        // Back-substitution on the k x k triangular system.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (l, yl) in y.iter().enumerate().take(k).skip(i + 1) {
                s -= h[l][i] * yl;
            }
            if h[i][i] == 0.0 {
                return Err(Error::Breakdown { iteration: iterations, relative_residual: rel });
            }
            y[i] = s / h[i][i];
        }
        for (v, yi) in basis.iter().zip(&y) {
            for (xk, vk) in x.iter_mut().zip(v) {
                *xk += yi * vk;
            }
        }

        let previous = rel;
        beta = residual(&x, &mut r);
        rel = beta / b_norm;
        if !rel.is_finite() {
            return Err(Error::NonFinite("GMRES residual"));
        }
        if invariant && rel > cfg.rel_tolerance && rel > 0.5 * previous {
            return Err(Error::Breakdown { iteration: iterations, relative_residual: rel });
        }
    }

    Ok(GmresOutcome {
        x,
        iterations,
        relative_residual: rel,
        converged: rel <= cfg.rel_tolerance,
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn laplacian_chain(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    fn dense_solve(a: &SparseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.nrows();
        let d = a.to_dense();
        let m = DMatrix::from_fn(n, n, |i, j| d[i][j]);
        m.lu().solve(&DVector::from_column_slice(b)).unwrap().as_slice().to_vec()
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let out = gmres(&SparseMatrix::identity(2), &[3.0, -1.0], None, &GmresConfig::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!((out.x[0] - 3.0).abs() < 1e-15 && (out.x[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_converges_in_two_iterations() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let out = gmres(&a, &[2.0, 4.0], None, &GmresConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
        assert!((out.x[0] - 1.0).abs() < 1e-12 && (out.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_chain_matches_dense_lu() {
        let a = laplacian_chain(10);
        let b: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
        let cfg = GmresConfig::with_tolerance(1e-10);
        let out = gmres(&a, &b, None, &cfg).unwrap();
        let exact = dense_solve(&a, &b);
        for (u, v) in out.x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn restart_smaller_than_dimension_still_converges() {
        let a = laplacian_chain(40);
        let b = vec![1.0; 40];
        let cfg = GmresConfig { restart: 5, rel_tolerance: 1e-9, max_iterations: 50_000 };
        let out = gmres(&a, &b, None, &cfg).unwrap();
        assert!(out.converged, "{}", out.relative_residual);
        let mut r = a.spmv(&out.x).unwrap();
        r.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
        assert!(norm2(&r) / norm2(&b) <= 1e-9);
    }

    #[test]
    fn iteration_cap_returns_unconverged_iterate() {
        let a = laplacian_chain(50);
        let cfg = GmresConfig { restart: 3, rel_tolerance: 1e-12, max_iterations: 7 };
        let out = gmres(&a, &vec![1.0; 50], None, &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 7);
        assert!(matches!(out.require_converged(), Err(Error::Convergence { iterations: 7, .. })));
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let out = gmres(&laplacian_chain(4), &[0.0; 4], None, &GmresConfig::default()).unwrap();
        assert_eq!(out.x, vec![0.0; 4]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn nan_rhs_is_rejected() {
        let err = gmres(&laplacian_chain(3), &[1.0, f64::NAN, 0.0], None, &GmresConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn singular_operator_breaks_down() {
        // b has a component outside the range of A.
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let err = gmres(&a, &[1.0, 1.0], None, &GmresConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Breakdown { .. }), "{err}");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let a = SparseMatrix::identity(2);
        let bad = GmresConfig { restart: 0, ..GmresConfig::default() };
        assert!(gmres(&a, &[1.0, 1.0], None, &bad).is_err());
        let bad = GmresConfig { rel_tolerance: 1.5, ..GmresConfig::default() };
        assert!(gmres(&a, &[1.0, 1.0], None, &bad).is_err());
    }

    fn random_spd(seed: u64, n: usize) -> SparseMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &m * m.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| spd[(i, j)]).collect()).collect();
        SparseMatrix::from_dense(&rows)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn spd_systems_match_dense_oracle(seed in any::<u64>(), rhs in prop::collection::vec(-1.0f64..1.0, 20)) {
            prop_assume!(norm2(&rhs) > 1e-3);
            let a = random_spd(seed, 20);
            let out = gmres(&a, &rhs, None, &GmresConfig::with_tolerance(1e-12)).unwrap();
            prop_assert!(out.converged);
            let exact = dense_solve(&a, &rhs);
            let err: f64 = out.x.iter().zip(&exact).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-8 * norm2(&exact).max(1.0));
        }

        #[test]
        fn residual_estimate_is_monotone_within_a_cycle(seed in any::<u64>()) {
            let a = random_spd(seed, 20);
            let b: Vec<f64> = (0..20).map(|i| ((i as f64) + (seed % 13) as f64).cos()).collect();
            let cfg = GmresConfig { restart: 20, rel_tolerance: 1e-13, max_iterations: 20 };
            let out = gmres(&a, &b, None, &cfg).unwrap();
            for w in out.residual_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }
}
