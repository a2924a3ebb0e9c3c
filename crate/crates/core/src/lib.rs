//! Condensed generalized finite element workbench for 2D Poisson problems.
//!
//! Builds FEM, flat-top GFEM, stable GFEM and condensed GFEM spaces on
//! quadrilateral meshes, assembles and solves pure Neumann problems, and
//! reports energy errors and scaled condition numbers.

pub mod analysis;
pub mod assembly;
pub mod condensation;
pub mod enrichment;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mesh;
pub mod plot;
pub mod problems;
pub mod pu;
pub mod quadrature;
pub mod spaces;

pub use error::{Error, Result};
pub use mesh::{CrackMesh, Mesh, MeshKind, Point, Square};
