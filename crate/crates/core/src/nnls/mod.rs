//! Nonnegative least squares with per-constraint thresholds.

pub mod lawson_hanson;
pub mod system;

pub use lawson_hanson::{
    lawson_hanson, lawson_hanson_until, NnlsOptions, NnlsSolution, Termination,
};
pub use system::{
    lq_precondition, lq_precondition_pivoted, rescale_rows, transformed_thresholds,
    ConstraintSystem, LqSystem, MAX_LQ_CONDITION,
};
