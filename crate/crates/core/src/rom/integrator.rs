//! RK2A integration of the hyperreduced model across time windows.

use super::window::{ReducedState, RomWindow, StageEval};
use crate::error::{Error, Result};
use crate::hydro::{limit_timestep, CflParams, Discretization, Energies, FullState, MassMatrices};
use crate::linalg::{axpy, norm2};
use crate::mode::Mode;
use crate::pod::{enrich_window_transition, WindowSchedule};
use crate::scalar::Real;

/// Relative residual above which a carried state counts as not
/// representable in the next window.
pub const REPRESENTABILITY_TOL: f64 = 1e-8;

/// How the online timestep is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum DtPolicy {
    /// CFL control over the sampled points.
    Adaptive(CflParams),
    /// Replays a fixed step sequence (e.g. the full model's).
    Prescribed(Vec<f64>),
}

/// One accepted reduced step.
#[derive(Clone, Debug)]
pub struct RomStep<T> {
    pub window: usize,
    pub next: ReducedState<T>,
    pub half: ReducedState<T>,
    pub dt: T,
    /// Integrand evaluations of the two force stages.
    pub evals: [usize; 2],
}

/// Outcome of an online run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RomStats {
    pub steps: usize,
    pub rejections: usize,
    pub window_switches: usize,
    /// Total integrand evaluations over all force calls.
    pub integrand_evals: usize,
    pub wall_seconds: f64,
}

/// Energy of a reduced state. Conservative windows evaluate it in reduced
/// coordinates; basic windows lift to the full space.
pub fn rom_total_energy<T: Real>(
    w: &RomWindow<T>,
    s: &ReducedState<T>,
    mass: &MassMatrices<T>,
) -> Energies<T> {
    match (w.mode, &w.basis.one_hat_e) {
        (Mode::Ceqp, Some(one)) => {
            let ie = crate::linalg::dot(one, &s.e);
            let ke = crate::linalg::dot(&s.v, &s.v) * T::lit(0.5);
            Energies::new(ie, ke)
        }
        _ => {
            let v = w.basis.lift_v(&s.v);
            let e = w.basis.lift_e(&s.e);
            Energies::new(mass.internal_energy(&e), mass.kinetic_energy(&v))
        }
    }
}

fn advance<T: Real>(base: &[T], rate: &[T], h: T) -> Vec<T> {
    let mut out = base.to_vec();
    axpy(h, rate, &mut out);
    out
}

/// Stages of one reduced step.
#[derive(Clone, Debug)]
pub struct StepStages<T: Real> {
    pub half: ReducedState<T>,
    pub next: ReducedState<T>,
    /// Forces at the midpoint.
    pub f_half: StageEval<T>,
    /// Forces at the end state; also the next step's first stage.
    pub f_next: StageEval<T>,
}

/// One reduced RK2A step. `f0` are the forces at `s`.
pub fn rk2a_step_rom<T: Real>(
    disc: &Discretization<T>,
    w: &RomWindow<T>,
    s: &ReducedState<T>,
    f0: &StageEval<T>,
    dt: T,
) -> Result<StepStages<T>> {
    let h = dt * T::lit(0.5);
    let v_half = advance(&s.v, &f0.velocity_force(), -h);
    let e_half = advance(&s.e, &f0.energy_force(&v_half), h);
    let x_half = advance(&s.x, &w.position_rate(&v_half), h);
    let half = ReducedState {
        v: v_half,
        e: e_half,
        x: x_half,
        t: s.t + h,
    };

    let f1 = w.evaluate(disc, &half)?;
    let v_next = advance(&s.v, &f1.velocity_force(), -dt);
    let v_bar: Vec<T> =
        s.v.iter()
            .zip(&v_next)
            .map(|(a, b)| (*a + *b) * T::lit(0.5))
            .collect();
    let e_next = advance(&s.e, &f1.energy_force(&v_bar), dt);
    let x_next = advance(&s.x, &w.position_rate(&v_bar), dt);
    let next = ReducedState {
        v: v_next,
        e: e_next,
        x: x_next,
        t: s.t + dt,
    };
    if !next.all_finite() {
        return Err(Error::Tangled {
            elem: 0,
            point: 0,
            det: f64::NAN,
        });
    }
    let f2 = w.evaluate(disc, &next)?;
    Ok(StepStages {
        half,
        next,
        f_half: f1,
        f_next: f2,
    })
}

/// Projects a full state onto a window's bases.
pub fn project_state<T: Real>(
    w: &RomWindow<T>,
    s: &FullState<T>,
    mass: &MassMatrices<T>,
) -> ReducedState<T> {
    ReducedState {
        v: w.basis.project_v(&s.v, mass),
        e: w.basis.project_e(&s.e, mass),
        x: w.basis.project_x(&s.x),
        t: s.t,
    }
}

fn relative_residual<T: Real>(a: &[T], b: &[T]) -> T {
    let d: Vec<T> = a.iter().zip(b).map(|(x, y)| *x - *y).collect();
    let n = norm2(a);
    if n > T::ZERO {
        norm2(&d) / n
    } else {
        norm2(&d)
    }
}

/// Moves the reduced state from `prev` into window `next`.
///
/// The basic variant projects. The conservative variant enriches the next
/// energy basis with the carried energy field, projects the carried
/// velocity (M_v-orthogonally, so kinetic energy drops by exactly
/// `|r_v|_M^2 / 2`) and returns that deficit to the internal energy along the
/// unity direction, so total energy is unchanged by the switch.
pub fn switch_window<T: Real>(
    disc: &Discretization<T>,
    mass: &MassMatrices<T>,
    prev: &RomWindow<T>,
    next: &RomWindow<T>,
    s: &ReducedState<T>,
) -> Result<(RomWindow<T>, ReducedState<T>)> {
    let carried = prev.basis.lift(&s.v, &s.e, &s.x, s.t);
    if next.mode == Mode::Beqp {
        return Ok((next.clone(), project_state(next, &carried, mass)));
    }
    let te_before = rom_total_energy(prev, s, mass).total;
    let enriched = enrich_window_transition(&next.basis, None, Some(&carried.e), None, mass);
    let window = next.with_basis(disc, enriched)?;
    let mut reduced = project_state(&window, &carried, mass);
    let back_e = window.basis.lift_e(&reduced.e);
    let r = relative_residual(&carried.e, &back_e);
    if !(r <= T::lit(REPRESENTABILITY_TOL)) {
        return Err(Error::NotRepresentable {
            residual: r.to_f64_(),
        });
    }
    let one = window
        .basis
        .one_hat_e
        .as_ref()
        .ok_or_else(|| Error::Config("conservative window without unity".into()))?;
    let deficit = te_before - rom_total_energy(&window, &reduced, mass).total;
    let norm2_one = crate::linalg::dot(one, one);
    axpy(deficit / norm2_one, one, &mut reduced.e);
    Ok((window, reduced))
}

/// Integrates the reduced model over all windows of `schedule`, starting
/// from the projection of `initial` onto window 0. `observe` sees every
/// accepted step with the window operators it used; time spent in it is
/// excluded from `wall_seconds`.
pub fn run_rom<T: Real>(
    disc: &Discretization<T>,
    mass: &MassMatrices<T>,
    windows: &[RomWindow<T>],
    schedule: &WindowSchedule,
    initial: &FullState<T>,
    policy: &DtPolicy,
    mut observe: impl FnMut(&RomWindow<T>, &RomStep<T>),
) -> Result<(RomWindow<T>, ReducedState<T>, RomStats)> {
    if windows.len() != schedule.n_windows() || windows.is_empty() {
        return Err(Error::Dimension(format!(
            "{} window operators for {} windows",
            windows.len(),
            schedule.n_windows()
        )));
    }
    let start = std::time::Instant::now();
    let mut stats = RomStats::default();
    let mut current = windows[0].clone();
    let mut state = project_state(&current, initial, mass);
    let mut dt_prev: Option<T> = None;
    let mut prescribed_idx = 0usize;
    let mut observer_seconds = 0.0;
    let t_end = T::lit(schedule.end(schedule.n_windows() - 1));
    let tol = t_end.abs().max(T::ONE) * T::lit(1e-12);

    for (wi, proto) in windows.iter().enumerate() {
        if wi > 0 {
            let (w, s) = switch_window(disc, mass, &current, proto, &state)?;
            current = w;
            state = s;
            stats.window_switches += 1;
        }
        let w_end = T::lit(schedule.end(wi));
        let mut f0 = current.evaluate(disc, &state)?;
        while w_end - state.t > tol {
            let (mut dt, proposal) = match policy {
                DtPolicy::Prescribed(seq) => {
                    let dt = *seq.get(prescribed_idx).ok_or_else(|| {
                        Error::Config(format!(
                            "prescribed timestep sequence exhausted at step {prescribed_idx}"
                        ))
                    })?;
                    (T::lit(dt), T::lit(dt))
                }
                DtPolicy::Adaptive(p) => {
                    let dt = limit_timestep(f0.min_scale(), dt_prev, p, state.t)?;
                    let remaining = w_end - state.t;
                    (if dt > remaining { remaining } else { dt }, dt)
                }
            };
            let mut tries = 0;
            let StepStages {
                half,
                next,
                f_half: f1,
                f_next: f2,
            } = loop {
                match rk2a_step_rom(disc, &current, &state, &f0, dt) {
                    Ok(out) => break out,
                    Err(Error::Tangled { .. }) => {
                        let DtPolicy::Adaptive(p) = policy else {
                            return Err(Error::TimestepCollapse {
                                t: state.t.to_f64_(),
                                dt: dt.to_f64_(),
                                dt_min: dt.to_f64_(),
                            });
                        };
                        tries += 1;
                        stats.rejections += 1;
                        dt *= T::lit(0.5);
                        if tries > p.max_rejections || dt < T::lit(p.dt_min) {
                            return Err(Error::TimestepCollapse {
                                t: state.t.to_f64_(),
                                dt: dt.to_f64_(),
                                dt_min: p.dt_min,
                            });
                        }
                    }
                    Err(e) => return Err(e),
                }
            };
            let step = RomStep {
                window: wi,
                next,
                half,
                dt,
                evals: [f0.evals(), f1.evals()],
            };
            stats.integrand_evals += f0.evals() + f1.evals();
            let obs = std::time::Instant::now();
            observe(&current, &step);
            observer_seconds += obs.elapsed().as_secs_f64();
            stats.steps += 1;
            prescribed_idx += 1;
            dt_prev = Some(if tries > 0 { dt } else { proposal });
            state = step.next;
            f0 = f2;
        }
    }
    stats.wall_seconds = start.elapsed().as_secs_f64() - observer_seconds;
    Ok((current, state, stats))
}

/// `v^T F_v - 1_e^T F_e(v)` at a conservative stage, with the scale
/// `|v| |F_hat|_F |1_e|`. Zero up to roundoff.
pub fn conservation_defect<T: Real>(f: &StageEval<T>, v: &[T]) -> Option<(T, T)> {
    match f {
        StageEval::Ceqp {
            f_hat, one_hat_e, ..
        } => {
            let a = crate::linalg::dot(v, &f.velocity_force());
            let b = crate::linalg::dot(one_hat_e, &f.energy_force(v));
            Some((a - b, norm2(v) * f_hat.norm() * norm2(one_hat_e)))
        }
        StageEval::Beqp { .. } => None,
    }
}
