//! Full-order Lagrangian hydrodynamics: discretization, stress, mass and
//! force assembly, RK2A integration and energy accounting.

pub mod discretization;
pub mod force;
pub mod integrator;
pub mod mass;
pub mod state;
pub mod stress;

pub use discretization::{Discretization, PointState, SpaceHeader};
pub use force::{
    assemble_energy_force, assemble_force_matrix, assemble_velocity_force, ForceMatrix,
};
pub use integrator::{limit_timestep, run_full, CflParams, FullModel, RunStats, StepOutput};
pub use mass::{assemble_mass, MassMatrices};
pub use state::{Energies, FullState};
pub use stress::{eos_pressure, eval_stress, sound_speed, StressEval, StressModel, Viscosity};
