//! Snapshot collections and step-uniform time windows.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydro::FullState;
use crate::scalar::Real;

/// Which full-model states are recorded as snapshots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotCadence {
    /// Every accepted step.
    #[default]
    Steps,
    /// Every accepted step plus the RK2A midpoint stage, each paired with
    /// the velocity the next energy update is tested against.
    StepsAndStages,
}

/// Training states of one window. Each snapshot may carry a test velocity
/// for the energy-force integrand; by default a snapshot is tested against
/// its own velocity.
#[derive(Clone, Debug)]
pub struct SnapshotSet<T> {
    pub window_id: usize,
    pub states: Vec<FullState<T>>,
    test_velocities: Vec<Option<Vec<T>>>,
}

impl<T: Real> SnapshotSet<T> {
    pub fn new(window_id: usize) -> Self {
        SnapshotSet {
            window_id,
            states: Vec::new(),
            test_velocities: Vec::new(),
        }
    }

    pub fn push(&mut self, state: FullState<T>) {
        self.states.push(state);
        self.test_velocities.push(None);
    }

    pub fn push_with_test(&mut self, state: FullState<T>, v_test: Vec<T>) {
        self.states.push(state);
        self.test_velocities.push(Some(v_test));
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn times(&self) -> Vec<T> {
        self.states.iter().map(|s| s.t).collect()
    }

    /// Velocity the energy integrand of snapshot `k` is tested against.
    pub fn test_velocity(&self, k: usize) -> &[T] {
        self.test_velocities[k]
            .as_deref()
            .unwrap_or(&self.states[k].v)
    }

    pub fn has_test_velocities(&self) -> bool {
        self.test_velocities.iter().any(Option::is_some)
    }

    fn matrix(&self, field: impl Fn(&FullState<T>) -> &[T]) -> DMatrix<T> {
        let rows = self.states.first().map_or(0, |s| field(s).len());
        let mut m = DMatrix::zeros(rows, self.states.len());
        for (k, s) in self.states.iter().enumerate() {
            m.column_mut(k).copy_from_slice(field(s));
        }
        m
    }

    pub fn velocity_matrix(&self) -> DMatrix<T> {
        self.matrix(|s| &s.v)
    }

    pub fn energy_matrix(&self) -> DMatrix<T> {
        self.matrix(|s| &s.e)
    }

    pub fn position_matrix(&self) -> DMatrix<T> {
        self.matrix(|s| &s.x)
    }

    /// Checks strictly increasing times, consistent sizes and finite data.
    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::Config(format!(
                "window {} has no snapshots",
                self.window_id
            )));
        }
        let (nv, ne) = (self.states[0].v.len(), self.states[0].e.len());
        for (k, s) in self.states.iter().enumerate() {
            if s.v.len() != nv || s.x.len() != nv || s.e.len() != ne {
                return Err(Error::Dimension(format!(
                    "snapshot {k} of window {} has mismatched sizes",
                    self.window_id
                )));
            }
            if !s.all_finite() {
                return Err(Error::Config(format!(
                    "snapshot {k} of window {} is not finite",
                    self.window_id
                )));
            }
            if k > 0 && !(s.t > self.states[k - 1].t) {
                return Err(Error::Config(format!(
                    "snapshot times of window {} not increasing",
                    self.window_id
                )));
            }
            if let Some(vt) = &self.test_velocities[k] {
                if vt.len() != nv {
                    return Err(Error::Dimension(format!(
                        "test velocity {k} has length {}",
                        vt.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Window boundaries `T_0 < T_1 < ... < T_{N_w}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSchedule {
    pub boundaries: Vec<f64>,
    pub samples_per_window: usize,
}

impl WindowSchedule {
    /// Step-uniform schedule: every `ns` accepted steps close a window; a
    /// shorter trailing window takes the remainder. `step_times` holds the
    /// time after each step, preceded by the initial time.
    pub fn from_step_times(step_times: &[f64], ns: usize) -> Result<Self> {
        if ns == 0 {
            return Err(Error::Config("samples per window must be positive".into()));
        }
        if step_times.len() < 2 {
            return Err(Error::Config(
                "need at least one step to form a window".into(),
            ));
        }
        let last = step_times.len() - 1;
        let mut boundaries: Vec<f64> = (0..=last).step_by(ns).map(|i| step_times[i]).collect();
        if !last.is_multiple_of(ns) {
            boundaries.push(step_times[last]);
        }
        let sched = WindowSchedule {
            boundaries,
            samples_per_window: ns,
        };
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundaries.len() < 2 || self.boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "window boundaries must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn n_windows(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn start(&self, w: usize) -> f64 {
        self.boundaries[w]
    }

    pub fn end(&self, w: usize) -> f64 {
        self.boundaries[w + 1]
    }

    /// Window index of accepted step `step` (0-based) in a step-uniform
    /// schedule.
    pub fn window_of_step(&self, step: usize) -> usize {
        (step / self.samples_per_window).min(self.n_windows() - 1)
    }
}
