//! Cut finite element method for linearly elastic membranes.
//!
//! Membrane surfaces are zero level sets of a scalar field sampled on a
//! structured tetrahedral or hexahedral background mesh. The surface is
//! reconstructed cell by cell as a polygonal facet, and the membrane is
//! discretised with the restriction of the 3D Lagrange basis to that facet.
//! Free membranes are stabilised by a penalty on jumps of the normal gradient
//! across interior faces of the cut band; membranes embedded in an elastic
//! solid instead add their stiffness to the bulk matrix.
//!
//! The pipeline is
//!
//! ```text
//! mesh::build_structured -> level_set::discretize -> level_set::classify
//!     -> cut::extract_surface -> assembly::* -> solver::solve_cg
//!     -> analysis::recover_stress
//! ```
//!
//! Runnable walkthroughs live under `examples/`; the `cutmem` binary wraps the
//! benchmark drivers in [`analysis`].

pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod cut;
pub mod error;
pub mod level_set;
pub mod mesh;
pub mod solver;
pub mod sparse;
pub mod tangential;
pub mod vtk;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
