//! Lagrangian compressible hydrodynamics on high-order finite elements,
//! windowed POD model reduction, and empirical-quadrature hyperreduction
//! (basic and energy-conservative variants).
//!
//! All numerics are generic over [`Real`] (`f32`/`f64`); the aliases at the
//! crate root fix the scalar to `f64`, which is what the pipeline uses.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod bench;
pub mod eqp;
pub mod error;
pub mod fem;
pub mod hydro;
pub mod io;
pub mod linalg;
pub mod mode;
pub mod nnls;
pub mod pod;
pub mod problems;
pub mod rom;
pub mod scalar;

pub use error::{Error, Result};
pub use mode::Mode;
pub use scalar::Real;

pub type Discretization = hydro::Discretization<f64>;
pub type FullState = hydro::FullState<f64>;
pub type MassMatrices = hydro::MassMatrices<f64>;
pub type ReducedBasis = pod::ReducedBasis<f64>;
pub type SnapshotSet = pod::SnapshotSet<f64>;
