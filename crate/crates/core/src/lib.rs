pub mod basis;
pub mod config;
pub mod error;
pub mod expr;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod projection;
pub mod scaling;
pub mod solver;
pub mod treesolve;

pub use error::{Error, ErrorCategory, Result};
pub use mesh::{Mesh, Point2};
pub use solver::{Discretization, ProblemSpec, Reference, Solution};
