//! Built-in problem families used by the benchmarks, the CLI and the tests.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::mesh::{generate_masked_grid, CellSpec, GridSpec, Mesh, Point2};
use crate::solver::{delta_source, density_charges, DeltaMode, Discretization, ProblemSpec, Reference, Terminal};

/// Permittivity assigned to terminal regions.
pub const TERMINAL_EPS_R: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Unit square, `ε_r ≡ 1`, zero Neumann data, cosine source.
    Square,
    /// As `Square` with `ε_r = 1` for `x < 0.5` and `2` beyond.
    SquareJump,
    /// Rectangle between two terminals at 0 and 1; `φ = x`.
    ParallelPlate,
    /// L-shaped flag between two terminals with a point charge.
    Flag,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Square, Family::SquareJump, Family::ParallelPlate, Family::Flag];

    pub fn name(self) -> &'static str {
        match self {
            Family::Square => "square",
            Family::SquareJump => "square-jump",
            Family::ParallelPlate => "parallel-plate",
            Family::Flag => "flag",
        }
    }

    /// Closed-form potential where one exists.
    pub fn exact(self) -> Option<fn(Point2) -> f64> {
        match self {
            Family::Square => Some(square_exact),
            Family::ParallelPlate => Some(|p: Point2| p.x),
            _ => None,
        }
    }

    /// Mesh with `n` cells per unit length.
    pub fn mesh(self, n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::Config("mesh resolution must be at least 1".into()));
        }
        match self {
            Family::Square => Ok(square_mesh(n, |_| 1.0)),
            Family::SquareJump => Ok(square_mesh(n, |c| if c.x < 0.5 { 1.0 } else { 2.0 })),
            Family::ParallelPlate => parallel_plate_mesh(n),
            Family::Flag => flag_mesh(n),
        }
    }

    /// Problem data on a discretization of [`mesh`](Self::mesh).
    pub fn spec(self, disc: &Discretization) -> Result<ProblemSpec> {
        let mesh = disc.mesh();
        match self {
            Family::Square | Family::SquareJump => {
                let mut spec = ProblemSpec::new(density_charges(mesh, &square_source())?);
                spec.reference = Reference::Point(Point2::ORIGIN, 2.0 / PI);
                Ok(spec)
            }
            Family::ParallelPlate => {
                let mut spec = ProblemSpec::new(vec![0.0; mesh.num_triangles()]);
                spec.terminals = vec![terminal("left", 1, 0.0, "left"), terminal("right", 2, 1.0, "right")];
                Ok(spec)
            }
            Family::Flag => {
                let mut charges = vec![0.0; mesh.num_triangles()];
                for (t, q) in delta_source(disc, FLAG_CHARGE, 1.0, DeltaMode::Smoothed { side: 0.04 })? {
                    charges[t] += q;
                }
                let mut spec = ProblemSpec::new(charges);
                spec.terminals = vec![terminal("gamma1", 1, 1.0, "gamma1"), terminal("gamma2", 2, 0.8, "gamma2")];
                Ok(spec)
            }
        }
    }

    /// Builds mesh, discretization and problem in one go.
    pub fn build(self, n: usize, eps0: f64) -> Result<(Discretization, ProblemSpec)> {
        let disc = Discretization::new(self.mesh(n)?, eps0)?;
        let spec = self.spec(&disc)?;
        Ok((disc, spec))
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem family '{s}' (expected square, square-jump, parallel-plate or flag)")))
    }
}

fn terminal(name: &str, region: u32, value: f64, marker: &str) -> Terminal {
    Terminal { name: name.into(), region, value, markers: vec![marker.into()], charge_point: None }
}

/// Charge density whose potential on the unit square is [`square_exact`].
pub fn square_source() -> ScalarFn {
    ScalarFn::new("pi*(cos(pi*x)+cos(pi*y))", |p| PI * ((PI * p.x).cos() + (PI * p.y).cos()))
}

pub fn square_exact(p: Point2) -> f64 {
    ((PI * p.x).cos() + (PI * p.y).cos()) / PI
}

fn square_mesh(n: usize, eps: impl Fn(Point2) -> f64) -> Mesh {
    crate::mesh::generate_structured_square(n, eps)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// `[0,1] × [0,0.5]` with one-cell terminal strips left (tag 1) and right (tag 2).
fn parallel_plate_mesh(n: usize) -> Result<Mesh> {
    let h = 1.0 / n as f64;
    let ny = (n / 2).max(1);
    let grid = GridSpec { origin: Point2::new(-h, 0.0), h, nx: n + 2, ny };
    let height = ny as f64 * h;
    generate_masked_grid(
        grid,
        |c| {
            let region = if c.x < 0.0 {
                1
            } else if c.x > 1.0 {
                2
            } else {
                0
            };
            Some(CellSpec { region })
        },
        |_, region| if region == 0 { 1.0 } else { TERMINAL_EPS_R },
        move |m| {
            if close(m.x, -h) {
                "left".into()
            } else if close(m.x, 1.0 + h) {
                "right".into()
            } else if close(m.y, 0.0) || close(m.y, height) {
                "wall".into()
            } else {
                crate::mesh::DEFAULT_MARKER.into()
            }
        },
    )
}

/// Location of the flag's source charge.
pub const FLAG_CHARGE: Point2 = Point2::new(-0.2, 0.6);

/// Flag `[−0.5,0.5]×[0.25,1] ∪ [−0.5,−0.25]×[−0.5,0.25]` with a terminal
/// strip along `x = −0.5` (tag 1) and one along the right edge of the
/// flag, `x = 0.5` for `y ∈ [0.25, 1]` (tag 2). `n` cells per unit length,
/// rounded up to a multiple of 4.
fn flag_mesh(n: usize) -> Result<Mesh> {
    let n = n.div_ceil(4) * 4;
    let h = 1.0 / n as f64;
    let grid = GridSpec { origin: Point2::new(-0.5 - h, -0.5), h, nx: n + 2, ny: n + n / 2 };
    let in_flag = |c: Point2| {
        let body = (-0.5..=0.5).contains(&c.x) && (0.25..=1.0).contains(&c.y);
        let pole = (-0.5..=-0.25).contains(&c.x) && (-0.5..=0.25).contains(&c.y);
        body || pole
    };
    generate_masked_grid(
        grid,
        move |c| {
            if in_flag(c) {
                Some(CellSpec { region: 0 })
            } else if c.x < -0.5 {
                Some(CellSpec { region: 1 })
            } else if c.x > 0.5 && c.y > 0.25 {
                Some(CellSpec { region: 2 })
            } else {
                None
            }
        },
        |_, region| if region == 0 { 1.0 } else { TERMINAL_EPS_R },
        move |m| {
            if close(m.x, -0.5 - h) {
                "gamma1".into()
            } else if close(m.x, 0.5 + h) {
                "gamma2".into()
            } else {
                "wall".into()
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("cube".parse::<Family>().is_err());
    }

    #[test]
    fn square_source_integrates_to_zero() {
        let mesh = Family::Square.mesh(16).unwrap();
        let q = density_charges(&mesh, &square_source()).unwrap();
        let abs: f64 = q.iter().map(|v| v.abs()).sum();
        assert!(q.iter().sum::<f64>().abs() <= 1e-13 * abs);
    }

    #[test]
    fn square_exact_is_two_over_pi_at_origin() {
        assert!((square_exact(Point2::ORIGIN) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn parallel_plate_layout() {
        let m = Family::ParallelPlate.mesh(8).unwrap();
        let count = |r| (0..m.num_triangles()).filter(|&t| m.region(t) == r).count();
        assert_eq!((count(0), count(1), count(2)), (64, 8, 8));
        assert!((m.total_area() - (0.5 + 2.0 * 0.5 / 8.0)).abs() < 1e-12);
    }

    #[test]
    fn flag_layout() {
        let m = Family::Flag.mesh(16).unwrap();
        let area = |r| (0..m.num_triangles()).filter(|&t| m.region(t) == r).map(|t| m.area(t)).sum::<f64>();
        assert!((area(0) - (0.75 + 0.1875)).abs() < 1e-12);
        assert!((area(1) - 1.5 / 16.0).abs() < 1e-12);
        assert!((area(2) - 0.75 / 16.0).abs() < 1e-12);
        crate::mesh::build_topology(&m).unwrap();
    }

    #[test]
    fn flag_source_is_a_unit_charge() {
        let (_, spec) = Family::Flag.build(64, 1.0).unwrap();
        assert!((spec.charges.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(spec.charges.iter().filter(|&&q| q != 0.0).count() > 4);
    }
}
