//! Kirchhoff plate discretization: problem data, assembly, constraints and
//! solve.

pub mod assembly;
pub mod boundary;
pub mod element;
pub mod field;
pub mod problem;
pub mod solve;
pub mod sparse;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use assembly::{assemble_load, assemble_stiffness, assemble_system, edge_rule, segment_rule, EdgePoint};
pub use boundary::{apply_dirichlet, dirichlet_constraints};
pub use element::ElementValues;
pub use field::{energy_norm, evaluate, field_partials, h2_seminorm, h2_seminorm_error, Partials};
pub use problem::{
    BoundaryValue, HessianField, LoadQuadrature, PlateProblem, PointLoad, Rotational, ScalarField, SideCondition, Transverse,
};
pub use solve::{DiscreteField, LinearSystem};
pub use sparse::SparseMatrix;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inconsistent boundary data: {0}")]
    BoundaryData(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
}
