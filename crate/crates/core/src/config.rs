//! TOML problem configuration.
//!
//! ```toml
//! eps0 = 1.0
//!
//! [source]
//! density = "pi*(cos(pi*x) + cos(pi*y))"
//! # density_file = "rho.txt"      # one density value per triangle
//! [[source.point]]
//! x = -0.2
//! y = 0.6
//! charge = 1.0
//! side = 0.04                    # omit for a concentrated charge
//!
//! [neumann]                      # outward ∂φ/∂n per boundary marker
//! top = "0"
//!
//! [[terminal]]
//! name = "gamma1"
//! region = 1
//! value = 1.0
//! markers = ["gamma1"]
//!
//! [reference]
//! point = [0.0, 0.0]
//! value = 0.6366197723675814
//!
//! [gmres]
//! restart = 60
//! rel_tolerance = 1e-8
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::linalg::GmresConfig;
use crate::mesh::Point2;
use crate::solver::{delta_source, density_charges, DeltaMode, DirichletOptions, Discretization, ProblemSpec, Reference, Terminal};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    /// Triangle at which the spanning tree is rooted.
    #[serde(default)]
    pub tree_root: usize,
    #[serde(default)]
    pub neutralize: bool,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub neumann: BTreeMap<String, String>,
    #[serde(default, rename = "terminal")]
    pub terminals: Vec<Terminal>,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
    #[serde(default)]
    pub gmres: GmresConfig,
    #[serde(default)]
    pub dirichlet: DirichletOptions,
}

fn default_eps0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Charge density expression in `x`, `y`, sampled at centroids.
    pub density: Option<String>,
    /// File of per-triangle charge densities, relative to the config file.
    pub density_file: Option<PathBuf>,
    #[serde(default, rename = "point")]
    pub points: Vec<PointSource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSource {
    pub x: f64,
    pub y: f64,
    pub charge: f64,
    /// Side of the smoothing window; concentrated if absent.
    pub side: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub point: Option<[f64; 2]>,
    pub triangle: Option<usize>,
    #[serde(default)]
    pub value: f64,
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ProblemConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1).unwrap_or(0);
            Error::Parse { line, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::Config(format!("eps0 must be positive, got {}", self.eps0)));
        }
        self.gmres.validate()?;
        if self.source.density.is_some() && self.source.density_file.is_some() {
            return Err(Error::Config("give either source.density or source.density_file, not both".into()));
        }
        if let Some(r) = &self.reference {
            if r.point.is_some() == r.triangle.is_some() {
                return Err(Error::Config("reference needs exactly one of 'point' or 'triangle'".into()));
            }
        }
        Ok(())
    }

    /// Problem data on `disc`. Relative file paths resolve against `base`.
    pub fn to_spec(&self, disc: &Discretization, base: &Path) -> Result<ProblemSpec> {
        let mesh = disc.mesh();
        let mut charges = match (&self.source.density, &self.source.density_file) {
            (Some(expr), _) => density_charges(mesh, &ScalarFn::parse(expr)?)?,
            (None, Some(file)) => {
                let text = std::fs::read_to_string(base.join(file))?;
                let rho = parse_values(&text)?;
                if rho.len() != mesh.num_triangles() {
                    return Err(Error::Dimension { context: "density file", expected: mesh.num_triangles(), got: rho.len() });
                }
                rho.iter().zip(mesh.areas()).map(|(r, a)| r * a).collect()
            }
            (None, None) => vec![0.0; mesh.num_triangles()],
        };
        for p in &self.source.points {
            let mode = match p.side {
                Some(side) => DeltaMode::Smoothed { side },
                None => DeltaMode::Concentrated,
            };
            for (t, q) in delta_source(disc, Point2::new(p.x, p.y), p.charge, mode)? {
                charges[t] += q;
            }
        }
        let neumann = self
            .neumann
            .iter()
            .map(|(marker, expr)| Ok((marker.clone(), ScalarFn::parse(expr)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let reference = match self.reference {
            None => Reference::default(),
            Some(ReferenceConfig { point: Some([x, y]), value, .. }) => Reference::Point(Point2::new(x, y), value),
            Some(ReferenceConfig { triangle: Some(t), value, .. }) => Reference::Triangle(t, value),
            Some(_) => unreachable!("validated"),
        };
        Ok(ProblemSpec {
            charges,
            neumann,
            terminals: self.terminals.clone(),
            reference,
            gmres: self.gmres,
            dirichlet: self.dirichlet,
            neutralize: self.neutralize,
        })
    }
}

/// Whitespace-separated numbers with `#` comments.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse { line: i + 1, message: format!("'{tok}' is not a number") })?;
            out.push(v);
        }
    }
    Ok(out)
}
