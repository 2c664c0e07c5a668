//! Empirical quadrature: constraint assembly and reduced-rule construction
//! for the basic and conservative variants.

pub mod assemble;
pub mod rule;

pub use assemble::{
    assemble_beqp_system_e, assemble_beqp_system_v, assemble_ceqp_system, beqp_test_functions,
    visit_points, Thresholds, B_FLOOR,
};
pub use rule::{build_reduced_rule, sample_dof_map, EqpConfig, RuleStats, SampleMap};
