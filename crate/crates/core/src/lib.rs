//! Trace finite element discretization of Cahn-Hilliard and
//! Navier-Stokes-Cahn-Hilliard flows on closed implicit surfaces.
//!
//! A fixed background tetrahedral mesh is cut by the zero level set of a
//! function `phi`; the finite element spaces live on the cut tetrahedra and
//! are restricted to the piecewise planar surface `Gamma_h`.

pub mod ch;
pub mod cutgeom;
pub mod discretization;
pub mod error;
pub mod fespace;
pub mod forms;
pub mod levelset;
pub mod linalg;
pub mod mesh;
pub mod nsch;
pub mod observables;
pub mod quadrature;
pub mod simplex;
pub mod simulation;

pub use discretization::{Discretization, GeometryOptions};
pub use error::{Error, Result};
pub use fespace::{DofMap, FieldVector, SpaceKind};
pub use levelset::{LevelSetSurface, Point3};
pub use mesh::{ActiveMesh, BackgroundMesh, BoundingBox};
