//! Meshes, finite element spaces, quadrature and geometric kernels.

pub mod basis;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod space;

pub use geometry::{eval_deformation, DeformationEval, RefTables};
pub use mesh::{build_cartesian_mesh, Domain, Mesh2D, WallTag};
pub use quadrature::{gauss_rule, QuadRule};
pub use space::{build_fem_space, FemSpace, SpaceKind, DIM};
