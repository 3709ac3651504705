//! Full pipeline: tree solve for `D`, loop projection, transpose tree solve
//! for `φ`, plus Dirichlet terminals by superposition.

mod dirichlet;
mod sample;
mod sources;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::basis::{boundary_flux_per_triangle, build_loop_tree, neumann_half_rwgs, HalfRwg, LoopTreeBasis};
use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::linalg::GmresConfig;
use crate::mesh::{build_topology, EdgeTopology, Mesh, Point2, PointLocator};
use crate::projection::{
    assemble_loop_gram, assemble_loop_tree_coupling, loop_inner_products, project_out_loops, LoopGram,
    LoopTreeCoupling,
};
use crate::treesolve::{assemble_incidence, neutrality_residual, neutrality_tolerance, IncidenceSystem};

pub use dirichlet::{solve_dirichlet, DirichletOptions, DirichletReport, Terminal};
pub use sample::{FieldSample, LineSample};
pub use sources::{delta_source, density_charges, DeltaMode};

/// Everything that depends only on the mesh: topology, loop-tree basis,
/// incidence, loop Gram matrix and the tree part of the coupling.
#[derive(Debug)]
pub struct Discretization {
    mesh: Mesh,
    topo: EdgeTopology,
    basis: LoopTreeBasis,
    incidence: IncidenceSystem,
    gram: LoopGram,
    coupling: LoopTreeCoupling,
    locator: PointLocator,
    eps0: f64,
    assembly_time: Duration,
    p2_cache: Mutex<HashMap<dirichlet::P2Key, Arc<Solution>>>,
}

impl Discretization {
    /// Builds with the spanning tree rooted at triangle 0.
    pub fn new(mesh: Mesh, eps0: f64) -> Result<Self> {
        Self::with_root(mesh, eps0, 0)
    }

    pub fn with_root(mesh: Mesh, eps0: f64, root: usize) -> Result<Self> {
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::Config(format!("vacuum permittivity must be positive, got {eps0}")));
        }
        if root >= mesh.num_triangles() {
            return Err(Error::Config(format!("tree root {root} does not exist")));
        }
        let start = Instant::now();
        let topo = build_topology(&mesh)?;
        let basis = build_loop_tree(&mesh, &topo, root)?;
        let incidence = assemble_incidence(&basis, &topo);
        let gram = assemble_loop_gram(&mesh, &basis, eps0);
        let coupling = assemble_loop_tree_coupling(&mesh, &topo, &basis, eps0);
        let locator = PointLocator::new(&mesh);
        Ok(Self {
            mesh,
            topo,
            basis,
            incidence,
            gram,
            coupling,
            locator,
            eps0,
            assembly_time: start.elapsed(),
            p2_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn topology(&self) -> &EdgeTopology {
        &self.topo
    }

    pub fn basis(&self) -> &LoopTreeBasis {
        &self.basis
    }

    pub fn incidence(&self) -> &IncidenceSystem {
        &self.incidence
    }

    pub fn gram(&self) -> &LoopGram {
        &self.gram
    }

    pub fn coupling(&self) -> &LoopTreeCoupling {
        &self.coupling
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    /// Wall time spent building the discretization.
    pub fn assembly_time(&self) -> Duration {
        self.assembly_time
    }

    pub fn locate(&self, p: Point2) -> Result<usize> {
        self.locator.locate(&self.mesh, p)
    }

    /// Absolute permittivity of triangle `t`.
    pub fn permittivity(&self, t: usize) -> f64 {
        self.eps0 * self.mesh.eps_r(t)
    }

    pub fn counts(&self) -> MeshCounts {
        MeshCounts {
            nodes: self.mesh.num_nodes(),
            triangles: self.mesh.num_triangles(),
            tree: self.basis.num_tree(),
            loops: self.basis.num_loops(),
            interior_edges: self.topo.interior_edges().len(),
            boundary_edges: self.topo.boundary_edges().len(),
        }
    }

    /// Half-RWGs for Neumann data keyed by boundary marker.
    pub fn half_rwgs(&self, neumann: &BTreeMap<String, ScalarFn>, dirichlet_markers: &BTreeSet<String>) -> Result<Vec<HalfRwg>> {
        neumann_half_rwgs(&self.mesh, &self.topo, neumann, dirichlet_markers, self.eps0)
    }

    /// Number of P2 unit solutions currently cached.
    pub fn cached_unit_solutions(&self) -> usize {
        self.p2_cache.lock().map(|c| c.len()).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MeshCounts {
    pub nodes: usize,
    pub triangles: usize,
    pub tree: usize,
    pub loops: usize,
    pub interior_edges: usize,
    pub boundary_edges: usize,
}

/// Where the additive constant of `φ` is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// Triangle containing the point takes the value.
    Point(Point2, f64),
    Triangle(usize, f64),
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Triangle(0, 0.0)
    }
}

/// Sources and boundary data of one solve on a fixed discretization.
#[derive(Debug, Clone, Default)]
pub struct ProblemSpec {
    /// Total charge `∫_T ρ` per triangle.
    pub charges: Vec<f64>,
    /// Normal derivative `∂φ/∂n` (outward) per Neumann marker. Unlisted
    /// markers are homogeneous Neumann.
    pub neumann: BTreeMap<String, ScalarFn>,
    /// Equipotential terminals; empty for a pure Neumann problem.
    pub terminals: Vec<Terminal>,
    pub reference: Reference,
    pub gmres: GmresConfig,
    pub dirichlet: DirichletOptions,
    /// Remove a residual charge imbalance by a uniform background density
    /// instead of failing the compatibility check.
    pub neutralize: bool,
}

impl ProblemSpec {
    pub fn new(charges: Vec<f64>) -> Self {
        Self { charges, ..Self::default() }
    }

    pub fn dirichlet_markers(&self) -> BTreeSet<String> {
        self.terminals.iter().flat_map(|t| t.markers.iter().cloned()).collect()
    }
}

/// `D_T(r) = slope_T (r − c_T) + offset_T` on every triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub slope: Vec<f64>,
    pub offset: Vec<Point2>,
}

impl FluxField {
    pub fn zeros(n: usize) -> Self {
        Self { slope: vec![0.0; n], offset: vec![Point2::ORIGIN; n] }
    }

    pub fn eval(&self, mesh: &Mesh, t: usize, r: Point2) -> Point2 {
        (r - mesh.centroid(t)) * self.slope[t] + self.offset[t]
    }

    fn add_rwg(&mut self, mesh: &Mesh, t: usize, opposite: usize, coeff: f64) {
        let w = coeff / (2.0 * mesh.area(t));
        self.slope[t] += w;
        self.offset[t] = self.offset[t] + (mesh.centroid(t) - mesh.node(opposite)) * w;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct StageTimings {
    pub tree_solve: f64,
    pub projection: f64,
    pub transpose_solve: f64,
    /// Field reconstruction and potential right-hand side.
    pub recovery: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.tree_solve + self.projection + self.transpose_solve + self.recovery
    }

    fn add(&mut self, other: &StageTimings) {
        self.tree_solve += other.tree_solve;
        self.projection += other.projection;
        self.transpose_solve += other.transpose_solve;
        self.recovery += other.recovery;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub gmres_iterations: usize,
    pub gmres_relative_residual: f64,
    /// `‖R I_t‖`, the loop pollution removed by the projection (summed with
    /// weights over superposed parts).
    pub pollution_norm: f64,
    /// `max_i |⟨L_i, E⟩|` after projection.
    pub loop_orthogonality: f64,
    /// `max_i |∫_{T_i} ∇·D − q_i|`, each relative to the largest charge or
    /// edge flux in that triangle's balance.
    pub charge_residual: f64,
    /// Signed `Σ q − Σ outward flux` before any neutralization.
    pub compatibility_residual: f64,
    pub timings: StageTimings,
    pub dirichlet: Option<DirichletReport>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub tree_coeffs: Vec<f64>,
    pub loop_coeffs: Vec<f64>,
    pub half_rwgs: Vec<HalfRwg>,
    /// Pulse coefficients of `φ`, one per triangle.
    pub potential: Vec<f64>,
    pub flux: FluxField,
    pub charges: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl Solution {
    /// `E = D/ε` evaluated on triangle `t`.
    pub fn field(&self, disc: &Discretization, t: usize, r: Point2) -> Point2 {
        self.flux.eval(disc.mesh(), t, r) * (1.0 / disc.permittivity(t))
    }

    /// Adds `alpha · other` to every linear quantity. `other` must carry no
    /// half-RWGs (it is a pure charge response).
    fn add_scaled(&mut self, alpha: f64, other: &Solution) {
        assert!(other.half_rwgs.is_empty(), "only source-free boundary responses can be superposed");
        let axpy = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += alpha * y);
        axpy(&mut self.tree_coeffs, &other.tree_coeffs);
        axpy(&mut self.loop_coeffs, &other.loop_coeffs);
        axpy(&mut self.potential, &other.potential);
        axpy(&mut self.charges, &other.charges);
        axpy(&mut self.flux.slope, &other.flux.slope);
        for (a, b) in self.flux.offset.iter_mut().zip(&other.flux.offset) {
            *a = *a + *b * alpha;
        }
    }

    fn shift_potential(&mut self, shift: f64) {
        if shift != 0.0 {
            self.potential.iter_mut().for_each(|v| *v += shift);
        }
    }
}

/// Signed compatibility residual `Σ q_i − Σ_edges (outward flux)`, computed
/// with the same discrete rules used in assembly. Zero for a solvable
/// Neumann problem.
pub fn check_compatibility(charges: &[f64], half_rwgs: &[HalfRwg]) -> f64 {
    charges.iter().sum::<f64>() - half_rwgs.iter().map(|h| h.coefficient).sum::<f64>()
}

/// Solves the Neumann problem of `spec` (terminals must be empty).
pub fn solve_neumann(disc: &Discretization, spec: &ProblemSpec) -> Result<Solution> {
    if !spec.terminals.is_empty() {
        return Err(Error::Config("problem has Dirichlet terminals; use solve_dirichlet".into()));
    }
    let halves = disc.half_rwgs(&spec.neumann, &BTreeSet::new())?;
    let mut charges = check_charges(disc, &spec.charges)?;
    let residual = check_compatibility(&charges, &halves);
    if spec.neutralize {
        let total = disc.mesh().total_area();
        for (q, a) in charges.iter_mut().zip(disc.mesh().areas()) {
            *q -= residual * a / total;
        }
    }
    let mut sol = solve_with_halves(disc, charges, halves, &spec.gmres)?;
    sol.diagnostics.compatibility_residual = residual;
    let (t, value) = match spec.reference {
        Reference::Triangle(t, v) => (t, v),
        Reference::Point(p, v) => (disc.locate(p)?, v),
    };
    if t >= disc.mesh().num_triangles() {
        return Err(Error::Config(format!("reference triangle {t} does not exist")));
    }
    let shift = value - sol.potential[t];
    sol.shift_potential(shift);
    Ok(sol)
}

fn check_charges(disc: &Discretization, charges: &[f64]) -> Result<Vec<f64>> {
    let n = disc.mesh().num_triangles();
    if charges.len() != n {
        return Err(Error::Dimension { context: "per-triangle charges", expected: n, got: charges.len() });
    }
    if charges.iter().any(|q| !q.is_finite()) {
        return Err(Error::NonFinite("charges"));
    }
    Ok(charges.to_vec())
}

/// The three stages with the potential pinned to 0 on the tree root.
pub(crate) fn solve_with_halves(
    disc: &Discretization,
    charges: Vec<f64>,
    halves: Vec<HalfRwg>,
    cfg: &GmresConfig,
) -> Result<Solution> {
    cfg.validate()?;
    let mesh = disc.mesh();
    let n = mesh.num_triangles();
    let mut timings = StageTimings::default();
    let half_coeffs: Vec<f64> = halves.iter().map(|h| h.coefficient).collect();
    let boundary_flux = boundary_flux_per_triangle(n, &halves);
    let compatibility_residual = neutrality_residual(&charges, &boundary_flux);

    let start = Instant::now();
    let tree_coeffs = disc.incidence.solve_tree(&charges, &boundary_flux)?;
    timings.tree_solve = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let coupling = if halves.is_empty() {
        disc.coupling.clone()
    } else {
        disc.coupling.with_half_rwgs(mesh, &disc.basis, &halves, disc.eps0)
    };
    let projection = project_out_loops(&disc.gram, &coupling, &tree_coeffs, &half_coeffs, cfg)?;
    timings.projection = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let flux = reconstruct_flux(disc, &tree_coeffs, &projection.loop_coeffs, &halves);
    let v_phi = assemble_potential_rhs(disc, &flux);
    timings.recovery = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let potential = disc.incidence.solve_tree_transpose(&v_phi, (disc.basis.root(), 0.0))?;
    timings.transpose_solve = start.elapsed().as_secs_f64();

    let inner = loop_inner_products(&disc.gram, &coupling, &projection.loop_coeffs, &tree_coeffs, &half_coeffs)?;
    let loop_orthogonality = inner.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let charge_residual = divergence_residual(disc, &flux, &charges, &tree_coeffs, &halves);

    Ok(Solution {
        tree_coeffs,
        loop_coeffs: projection.loop_coeffs,
        half_rwgs: halves,
        potential,
        flux,
        charges,
        diagnostics: Diagnostics {
            gmres_iterations: projection.iterations,
            gmres_relative_residual: projection.relative_residual,
            pollution_norm: projection.pollution_norm,
            loop_orthogonality,
            charge_residual,
            compatibility_residual,
            timings,
            dirichlet: None,
        },
    })
}

/// Per-triangle linear form of `D` from tree, loop and half-RWG coefficients.
pub fn reconstruct_flux(disc: &Discretization, tree: &[f64], loops: &[f64], halves: &[HalfRwg]) -> FluxField {
    let mesh = disc.mesh();
    let mut flux = FluxField::zeros(mesh.num_triangles());
    for (k, &coeff) in tree.iter().enumerate() {
        let edge = disc.topo.interior_edge(disc.incidence.tree_edge(k));
        flux.add_rwg(mesh, edge.plus, edge.plus_opposite, coeff);
        flux.add_rwg(mesh, edge.minus, edge.minus_opposite, -coeff);
    }
    for h in halves {
        flux.add_rwg(mesh, h.triangle, h.opposite, h.coefficient);
    }
    for (lf, &coeff) in disc.basis.loops().iter().zip(loops) {
        for &(t, v) in lf.support() {
            flux.offset[t] = flux.offset[t] + v * coeff;
        }
    }
    flux
}

/// `V_k = ⟨T_k, D/ε⟩` per tree edge, so that `ν⁺ − ν⁻ = V_k`.
///
/// With `D = κ (r − c) + d` and `T = ±(r − p)/(2A)` the integrand is
/// quadratic; the closed form is `±(κ J + A (c − p)·d) / (2A ε)` with
/// `J = ∫_T |r − c|²`.
pub fn assemble_potential_rhs(disc: &Discretization, flux: &FluxField) -> Vec<f64> {
    let mesh = disc.mesh();
    let moment = |t: usize, opposite: usize, sign: f64| -> f64 {
        let area = mesh.area(t);
        let lever = mesh.centroid(t) - mesh.node(opposite);
        let integral = flux.slope[t] * mesh.polar_moment(t) + area * lever.dot(flux.offset[t]);
        sign * integral / (2.0 * area * disc.permittivity(t))
    };
    (0..disc.incidence.num_tree())
        .map(|k| {
            let edge = disc.topo.interior_edge(disc.incidence.tree_edge(k));
            moment(edge.plus, edge.plus_opposite, 1.0) + moment(edge.minus, edge.minus_opposite, -1.0)
        })
        .collect()
}

/// Largest per-triangle mismatch between `∫ ∇·D = 2 κ A` and the charge,
/// relative to the charge and flux scale.
fn divergence_residual(disc: &Discretization, flux: &FluxField, charges: &[f64], tree: &[f64], halves: &[HalfRwg]) -> f64 {
    let mesh = disc.mesh();
    // Largest term entering each triangle's balance.
    let mut scale: Vec<f64> = charges.iter().map(|q| q.abs()).collect();
    for (k, c) in tree.iter().enumerate() {
        let (p, m) = disc.incidence.plus_minus(k);
        scale[p] = scale[p].max(c.abs());
        scale[m] = scale[m].max(c.abs());
    }
    for h in halves {
        scale[h.triangle] = scale[h.triangle].max(h.coefficient.abs());
    }
    (0..mesh.num_triangles())
        .map(|t| {
            let r = (2.0 * flux.slope[t] * mesh.area(t) - charges[t]).abs();
            if scale[t] > 0.0 {
                r / scale[t]
            } else {
                r
            }
        })
        .fold(0.0f64, f64::max)
}

/// Area-weighted mean of per-triangle values over the triangles of `region`.
pub fn region_mean(mesh: &Mesh, values: &[f64], region: u32) -> Option<f64> {
    let (mut sum, mut area) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        if mesh.region(t) == region {
            sum += values[t] * mesh.area(t);
            area += mesh.area(t);
        }
    }
    (area > 0.0).then(|| sum / area)
}

/// `max − min` of per-triangle values over `region`.
pub fn region_spread(mesh: &Mesh, values: &[f64], region: u32) -> Option<f64> {
    let vals = (0..mesh.num_triangles()).filter(|&t| mesh.region(t) == region).map(|t| values[t]);
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    (lo <= hi).then_some(hi - lo)
}

/// Neutrality check used before the tree solve, exposed for callers that
/// want to test data without solving.
pub fn is_compatible(charges: &[f64], half_rwgs: &[HalfRwg]) -> bool {
    let flux: Vec<f64> = half_rwgs.iter().map(|h| h.coefficient).collect();
    let residual = check_compatibility(charges, half_rwgs);
    residual.abs() <= neutrality_tolerance(charges, &flux)
}
