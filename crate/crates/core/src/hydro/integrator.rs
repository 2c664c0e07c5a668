//! Two-stage averaged Runge–Kutta (RK2A) integration of the full model and
//! CFL timestep control.

use serde::{Deserialize, Serialize};

use super::discretization::Discretization;
use super::force::{assemble_force_matrix, LocalBuffers};
use super::mass::MassMatrices;
use super::state::{Energies, FullState};
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::scalar::Real;

/// CFL controller parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CflParams {
    pub cfl: f64,
    pub growth: f64,
    pub dt_min: f64,
    /// Consecutive halvings allowed before giving up on a step.
    pub max_rejections: usize,
}

impl Default for CflParams {
    fn default() -> Self {
        CflParams {
            cfl: 0.5,
            growth: 1.02,
            dt_min: 1e-12,
            max_rejections: 20,
        }
    }
}

/// Applies the CFL bound and growth limit to a raw time-scale estimate.
pub fn limit_timestep<T: Real>(
    min_time_scale: T,
    dt_prev: Option<T>,
    params: &CflParams,
    t: T,
) -> Result<T> {
    let mut dt = T::lit(params.cfl) * min_time_scale;
    if let Some(prev) = dt_prev {
        dt = dt.min(T::lit(params.growth) * prev);
    }
    if !(dt >= T::lit(params.dt_min)) {
        return Err(Error::TimestepCollapse {
            t: t.to_f64_(),
            dt: dt.to_f64_(),
            dt_min: params.dt_min,
        });
    }
    Ok(dt)
}

/// One accepted RK2A step: end state and midpoint stage.
#[derive(Clone, Debug)]
pub struct StepOutput<T> {
    pub next: FullState<T>,
    pub half: FullState<T>,
}

/// Full-order model: discretization plus its constant mass matrices.
pub struct FullModel<'a, T> {
    pub disc: &'a Discretization<T>,
    pub mass: &'a MassMatrices<T>,
}

impl<'a, T: Real> FullModel<'a, T> {
    pub fn new(disc: &'a Discretization<T>, mass: &'a MassMatrices<T>) -> Self {
        FullModel { disc, mass }
    }

    /// `IE = 1^T M_e e`, `KE = v^T M_v v / 2`.
    pub fn total_energy(&self, s: &FullState<T>) -> Energies<T> {
        Energies::new(
            self.mass.internal_energy(&s.e),
            self.mass.kinetic_energy(&s.v),
        )
    }

    /// Minimum of `l / (c_s + |v|)` over all quadrature points.
    pub fn min_time_scale(&self, s: &FullState<T>) -> Result<T> {
        let disc = self.disc;
        let n_q = disc.rule.n_q();
        let mut buf = LocalBuffers::default();
        let mut m = T::max_value().unwrap_or(T::lit(1e300));
        for el in 0..disc.space_v.n_elements() {
            buf.load(disc, s, el);
            for q in 0..n_q {
                let ps = disc.eval_point(el * n_q + q, &buf.x, &buf.v, &buf.e)?;
                m = m.min(ps.time_scale());
            }
        }
        Ok(m)
    }

    pub fn control_timestep(
        &self,
        s: &FullState<T>,
        dt_prev: Option<T>,
        params: &CflParams,
    ) -> Result<T> {
        limit_timestep(self.min_time_scale(s)?, dt_prev, params, s.t)
    }

    /// One RK2A step of size `dt`. Tangling at either stage is returned as
    /// [`Error::Tangled`] so the caller can retry with a smaller step.
    pub fn rk2a_step(&self, s: &FullState<T>, dt: T) -> Result<StepOutput<T>> {
        let disc = self.disc;
        let half_dt = dt * T::lit(0.5);

        let f0 = assemble_force_matrix(disc, s)?;
        let mut dv = f0.mul_unity(disc);
        self.mass.solve_velocity(&mut dv);
        let mut v_half = s.v.clone();
        axpy(-half_dt, &dv, &mut v_half);

        let mut de = f0.tr_mul(disc, &v_half);
        self.mass.solve_energy(&mut de);
        let mut e_half = s.e.clone();
        axpy(half_dt, &de, &mut e_half);

        let mut x_half = s.x.clone();
        axpy(half_dt, &v_half, &mut x_half);

        let half = FullState {
            v: v_half,
            e: e_half,
            x: x_half,
            t: s.t + half_dt,
        };

        let f1 = assemble_force_matrix(disc, &half)?;
        let mut dv = f1.mul_unity(disc);
        self.mass.solve_velocity(&mut dv);
        let mut v_next = s.v.clone();
        axpy(-dt, &dv, &mut v_next);

        let v_bar: Vec<T> =
            s.v.iter()
                .zip(&v_next)
                .map(|(a, b)| (*a + *b) * T::lit(0.5))
                .collect();
        let mut de = f1.tr_mul(disc, &v_bar);
        self.mass.solve_energy(&mut de);
        let mut e_next = s.e.clone();
        axpy(dt, &de, &mut e_next);

        let mut x_next = s.x.clone();
        axpy(dt, &v_bar, &mut x_next);

        Ok(StepOutput {
            next: FullState {
                v: v_next,
                e: e_next,
                x: x_next,
                t: s.t + dt,
            },
            half,
        })
    }
}

/// Outcome of a time integration loop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub rejections: usize,
    /// Rejections after the first accepted step.
    pub late_rejections: usize,
    pub wall_seconds: f64,
}

/// Integrates from `state` to `t_final`. `observe` sees every accepted
/// step as `(step index, output, dt)`.
pub fn run_full<T: Real>(
    model: &FullModel<'_, T>,
    mut state: FullState<T>,
    t_final: T,
    params: &CflParams,
    mut observe: impl FnMut(usize, &StepOutput<T>, T),
) -> Result<(FullState<T>, RunStats)> {
    let start = std::time::Instant::now();
    let mut stats = RunStats::default();
    let mut dt_prev: Option<T> = None;
    let mut scale = model.min_time_scale(&state)?;
    let tol = t_final * T::lit(1e-12);
    while t_final - state.t > tol {
        let mut dt = limit_timestep(scale, dt_prev, params, state.t)?;
        let proposal = dt;
        let remaining = t_final - state.t;
        if dt > remaining {
            dt = remaining;
        }
        let mut tries = 0;
        let (out, next_scale) = loop {
            // The end state must be untangled too; its time scale seeds the
            // next step.
            let attempt = model.rk2a_step(&state, dt).and_then(|out| {
                let s = model.min_time_scale(&out.next)?;
                Ok((out, s))
            });
            match attempt {
                Ok(ok) => break ok,
                Err(Error::Tangled { .. }) if tries < params.max_rejections => {
                    tries += 1;
                    stats.rejections += 1;
                    if stats.steps > 0 {
                        stats.late_rejections += 1;
                    }
                    dt *= T::lit(0.5);
                    if dt < T::lit(params.dt_min) {
                        return Err(Error::TimestepCollapse {
                            t: state.t.to_f64_(),
                            dt: dt.to_f64_(),
                            dt_min: params.dt_min,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        };
        observe(stats.steps, &out, dt);
        stats.steps += 1;
        dt_prev = Some(if tries > 0 { dt } else { proposal });
        state = out.next;
        scale = next_scale;
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok((state, stats))
}
