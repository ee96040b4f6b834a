//! Finite element tools for a doubly nonlinear parabolic problem and its
//! elliptic (separated-variables) counterpart.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cgo;
pub mod dtn;
pub mod elliptic;
pub mod error;
pub mod fem;
pub mod field;
pub mod linearization;
pub mod mesh;
pub mod parabolic;

pub use elliptic::{EllipticProblem, EllipticSolution, SolverSettings};
pub use error::{Error, Result};
pub use field::{BoundaryTrace, NodalField};
pub use mesh::{make_unit_square_mesh, TriangleMesh};
