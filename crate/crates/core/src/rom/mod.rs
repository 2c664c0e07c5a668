//! Online stage: hyperreduced forces, reduced RK2A and window switching.

pub mod integrator;
pub mod window;

pub use integrator::{
    conservation_defect, project_state, rk2a_step_rom, rom_total_energy, run_rom, switch_window,
    DtPolicy, RomStats, RomStep, REPRESENTABILITY_TOL,
};
pub use window::{LocalFields, ReducedState, RomWindow, StageEval};
