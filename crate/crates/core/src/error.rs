use thiserror::Error;

/// Errors raised by the solvers and the offline/online pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("mesh tangling: det J = {det:e} at element {elem}, point {point}")]
    Tangled { elem: usize, point: usize, det: f64 },

    #[error("matrix not positive definite (pivot {index}, value {value:e})")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("timestep {dt:e} fell below minimum {dt_min:e} at t = {t}")]
    TimestepCollapse { t: f64, dt: f64, dt_min: f64 },

    #[error("LQ preconditioning failed: condition estimate {cond:e}")]
    PreconditionFailure { cond: f64 },

    #[error(
        "NNLS could not meet thresholds after {iterations} iterations \
         (worst residual/threshold ratio {worst_ratio:e} at row {worst_row}); try larger eps"
    )]
    InfeasibleTolerance {
        iterations: usize,
        worst_row: usize,
        worst_ratio: f64,
        residuals: Vec<f64>,
    },

    #[error("window switch: carried state not representable (relative residual {residual:e})")]
    NotRepresentable { residual: f64 },

    #[error("window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
