//! Domains, simplicial meshes, boundary holes and tangential fields.

mod domain;
mod hole;
mod mesh;
mod tangential;

pub use domain::Domain;
pub use hole::{boundary_measure, make_hole_from_arc, BoundaryHole, HoleArc};
pub(crate) use mesh::GAUSS2;
pub use mesh::{generate_mesh, BoundaryFacet, Mesh, MeshExport};
pub use tangential::{cutoff, Extension, TangentialField};
