//! Snapshots, windowed POD bases, offsets and cross-window enrichment.

pub mod basis;
pub mod mgs;
pub mod snapshots;
pub mod svd;

pub use basis::{
    build_window_bases, enrich_window_transition, BasisMetric, OffsetPolicy, ReducedBasis,
};
pub use mgs::{mgs2_append, mgs2_orthonormalize, Metric, DROP_TOL};
pub use snapshots::{SnapshotCadence, SnapshotSet, WindowSchedule};
pub use svd::{energy_rank, pod_basis, PodMetric, PodResult};
