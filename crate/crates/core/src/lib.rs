//! Best Sobolev trace constants for functions vanishing on a boundary hole,
//! optimal holes of prescribed measure, shape derivatives with respect to
//! tangential deformations of the hole, and the one-dimensional limit of
//! thin domains.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descent;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod hole_optimizer;
pub mod one_dim;
pub mod shape_derivative;
pub mod thin_domain;
pub mod trace_solver;

pub use error::{Error, Result};
pub use fem::{Field, ProblemConfig};
pub use geometry::{generate_mesh, make_hole_from_arc, BoundaryHole, Domain, Mesh};
pub use trace_solver::{solve_trace_constant, TraceResult};
