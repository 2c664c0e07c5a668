//! Reduced quadrature rules from constraint systems, and the sampled
//! degrees of freedom they touch.

use serde::{Deserialize, Serialize};

use super::assemble::Thresholds;
use crate::error::{Error, Result};
use crate::fem::QuadRule;
use crate::hydro::Discretization;
use crate::mode::Mode;
use crate::nnls::{
    lawson_hanson, lawson_hanson_until, lq_precondition, lq_precondition_pivoted, rescale_rows,
    ConstraintSystem, NnlsOptions, NnlsSolution, Termination,
};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqpConfig {
    pub mode: Mode,
    pub thresholds: Thresholds,
    /// Use every `snapshot_stride`-th training snapshot in the constraints.
    pub snapshot_stride: usize,
    pub precondition: bool,
    /// Return the full rule (which meets every constraint exactly) when
    /// NNLS cannot reach the thresholds.
    pub full_rule_fallback: bool,
    pub nnls: NnlsOptions,
}

impl EqpConfig {
    pub fn default_eps_rel(mode: Mode) -> f64 {
        match mode {
            Mode::Beqp => 1e-4,
            Mode::Ceqp => 1e-5,
        }
    }

    pub fn new(mode: Mode) -> Self {
        EqpConfig {
            mode,
            thresholds: Thresholds::Relative(Self::default_eps_rel(mode)),
            snapshot_stride: 1,
            precondition: false,
            full_rule_fallback: false,
            nnls: NnlsOptions::default(),
        }
    }

    pub fn with_eps_rel(mut self, eps_rel: f64) -> Self {
        self.thresholds = Thresholds::Relative(eps_rel);
        self
    }
}

/// Diagnostics of one reduced-rule construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleStats {
    pub n_constraints: usize,
    pub n_active_rows: usize,
    pub n_points: usize,
    pub nnz: usize,
    pub iterations: usize,
    pub preconditioned: bool,
    pub lq_condition: Option<f64>,
    pub termination: Termination,
    /// The full rule was returned in place of an NNLS solution.
    pub full_rule: bool,
    /// `max_s |c^s (rho~ - rho)| / eps_s` on the original system.
    pub worst_ratio: f64,
}

fn solve_with_fallback<T: Real>(
    scaled: &ConstraintSystem<T>,
    rho_full: &[T],
    cfg: &EqpConfig,
) -> Result<(NnlsSolution<T>, bool, Option<f64>)> {
    if cfg.precondition && scaled.n_constraints() > 0 {
        let rank_tol = T::from_usize_(scaled.n_constraints().max(scaled.n_points())) * T::EPS;
        let lq = match lq_precondition(scaled, Some(rho_full)) {
            Ok(lq) => Some(lq),
            Err(Error::PreconditionFailure { .. }) => {
                lq_precondition_pivoted(scaled, rho_full, rank_tol).ok()
            }
            Err(e) => return Err(e),
        };
        if let Some(lq) = lq {
            let cond = Some(lq.condition.to_f64_());
            // Stop once L (Q r - b_t), the original residual up to the
            // truncated remainder, meets the original thresholds.
            let accept = |rt: &[T]| {
                let orig = &lq.l * nalgebra::DVector::from_column_slice(rt);
                orig.iter()
                    .zip(&lq.perm)
                    .all(|(r, &i)| r.abs() <= scaled.eps[i])
            };
            if let Ok(sol) = lawson_hanson_until(&lq.system, &cfg.nnls, accept) {
                if scaled.is_feasible(&sol.weights) {
                    return Ok((sol, true, cond));
                }
            }
            let sol = lawson_hanson(scaled, &cfg.nnls)?;
            return Ok((sol, false, cond));
        }
    }
    Ok((lawson_hanson(scaled, &cfg.nnls)?, false, None))
}

/// Rescale, LQ-precondition (falling back to the rescaled system when the
/// factor is singular or the transformed solution misses a threshold) and
/// solve. Every training constraint of `sys` is met on return.
pub fn build_reduced_rule<T: Real>(
    sys: &ConstraintSystem<T>,
    cfg: &EqpConfig,
    rule: &QuadRule<T>,
) -> Result<(QuadRule<T>, RuleStats)> {
    if sys.n_points() != rule.len() {
        return Err(Error::Dimension(format!(
            "{} constraint columns for {} points",
            sys.n_points(),
            rule.len()
        )));
    }
    let (scaled, kept) = rescale_rows(sys);
    let solved =
        solve_with_fallback(&scaled, &rule.full_weights, cfg).and_then(|(sol, pre, cond)| {
            let (worst_row, worst) = sys.worst_ratio(&sol.weights);
            if worst > T::ONE {
                return Err(Error::InfeasibleTolerance {
                    iterations: sol.iterations,
                    worst_row,
                    worst_ratio: worst.to_f64_(),
                    residuals: sys
                        .residuals(&sol.weights)
                        .iter()
                        .map(|r| r.to_f64_())
                        .collect(),
                });
            }
            Ok((sol, pre, cond, worst))
        });
    let (sol, preconditioned, lq_condition, worst) = match solved {
        Err(Error::InfeasibleTolerance { iterations, .. }) if cfg.full_rule_fallback => {
            let weights = rule.full_weights.clone();
            let (_, worst) = sys.worst_ratio(&weights);
            if worst > T::ONE {
                return Err(Error::InfeasibleTolerance {
                    iterations,
                    worst_row: sys.worst_ratio(&weights).0,
                    worst_ratio: worst.to_f64_(),
                    residuals: sys
                        .residuals(&weights)
                        .iter()
                        .map(|r| r.to_f64_())
                        .collect(),
                });
            }
            let residuals = sys.residuals(&weights);
            let nnz = weights.iter().filter(|w| **w != T::ZERO).count();
            let sol = NnlsSolution {
                weights,
                nnz,
                iterations,
                residuals,
                termination: Termination::Thresholds,
            };
            let stats = finish_stats(sys, &kept, rule, &sol, false, None, worst, true);
            return Ok((rule.with_reduced(sol.weights), stats));
        }
        other => other?,
    };
    let stats = finish_stats(
        sys,
        &kept,
        rule,
        &sol,
        preconditioned,
        lq_condition,
        worst,
        false,
    );
    Ok((rule.with_reduced(sol.weights), stats))
}

#[allow(clippy::too_many_arguments)]
fn finish_stats<T: Real>(
    sys: &ConstraintSystem<T>,
    kept: &[usize],
    rule: &QuadRule<T>,
    sol: &NnlsSolution<T>,
    preconditioned: bool,
    lq_condition: Option<f64>,
    worst: T,
    full_rule: bool,
) -> RuleStats {
    RuleStats {
        n_constraints: sys.n_constraints(),
        n_active_rows: kept.len(),
        n_points: rule.len(),
        nnz: sol.weights.iter().filter(|w| **w != T::ZERO).count(),
        iterations: sol.iterations,
        preconditioned,
        lq_condition,
        termination: sol.termination,
        full_rule,
        worst_ratio: worst.to_f64_(),
    }
}

/// Elements, points and full DOFs touched by one or more reduced rules.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMap {
    pub elements: Vec<usize>,
    pub v_dofs: Vec<usize>,
    pub e_dofs: Vec<usize>,
}

impl SampleMap {
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Union of the elements owning nonzero-weight points of `rules` and of
/// their local kinematic (shared by `v` and `x`) and thermodynamic DOFs.
pub fn sample_dof_map<T: Real>(rules: &[&QuadRule<T>], disc: &Discretization<T>) -> SampleMap {
    let mut elements: Vec<usize> = rules
        .iter()
        .flat_map(|r| r.sparse_reduced().into_iter().map(|(j, _)| r.element_of(j)))
        .collect();
    elements.sort_unstable();
    elements.dedup();
    let collect = |space: &crate::fem::FemSpace<T>| {
        let mut d: Vec<usize> = elements
            .iter()
            .flat_map(|&e| space.element_dofs(e).iter().copied())
            .collect();
        d.sort_unstable();
        d.dedup();
        d
    };
    let v_dofs = collect(&disc.space_v);
    let e_dofs = collect(&disc.space_e);
    SampleMap {
        elements,
        v_dofs,
        e_dofs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{run_offline, SimConfig};
    use crate::eqp::assemble_ceqp_system;
    use crate::pod::{build_window_bases, OffsetPolicy};
    use crate::problems::{make_problem, DiscretizationConfig, ProblemKind, ProblemSpec};

    fn system() -> (crate::problems::Problem<f64>, ConstraintSystem<f64>) {
        let p = make_problem(
            ProblemSpec::new(ProblemKind::Sedov),
            &DiscretizationConfig {
                m: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let run = run_offline(
            &p,
            &SimConfig {
                ns: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let snaps = &run.snapshots[0];
        let basis =
            build_window_bases(snaps, 0.9999, Mode::Ceqp, &p.mass, OffsetPolicy::Zero).unwrap();
        let sys =
            assemble_ceqp_system(&p.disc, &basis, snaps, &Thresholds::Relative(1e-5)).unwrap();
        (p, sys)
    }

    #[test]
    fn reduced_rule_meets_training_constraints() {
        let (p, sys) = system();
        let (rule, stats) =
            build_reduced_rule(&sys, &EqpConfig::new(Mode::Ceqp), &p.disc.rule).unwrap();
        assert!(sys.is_feasible(&rule.reduced_weights));
        assert!(rule.reduced_weights.iter().all(|w| *w >= 0.0));
        assert_eq!(stats.nnz, rule.nnz());
        assert!(stats.nnz <= sys.n_constraints() && stats.nnz < rule.len());
        assert!(stats.worst_ratio <= 1.0 && !stats.full_rule);
        let map = sample_dof_map(&[&rule], &p.disc);
        for (j, _) in rule.sparse_reduced() {
            assert!(map.elements.contains(&rule.element_of(j)));
        }
        assert!(map.v_dofs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn full_rule_fallback_is_opt_in() {
        let (p, sys) = system();
        let mut cfg = EqpConfig::new(Mode::Ceqp);
        cfg.nnls.max_iter = Some(0);
        assert!(matches!(
            build_reduced_rule(&sys, &cfg, &p.disc.rule),
            Err(Error::InfeasibleTolerance { .. })
        ));
        cfg.full_rule_fallback = true;
        let (rule, stats) = build_reduced_rule(&sys, &cfg, &p.disc.rule).unwrap();
        assert!(stats.full_rule);
        assert_eq!(rule.reduced_weights, p.disc.rule.full_weights);
    }

    #[test]
    fn preconditioned_rule_is_feasible() {
        let (p, sys) = system();
        let mut cfg = EqpConfig::new(Mode::Ceqp);
        cfg.precondition = true;
        let (rule, _) = build_reduced_rule(&sys, &cfg, &p.disc.rule).unwrap();
        assert!(sys.is_feasible(&rule.reduced_weights));
    }

    #[test]
    fn rule_size_mismatch() {
        let (p, sys) = system();
        let other = make_problem::<f64>(
            ProblemSpec::new(ProblemKind::TriplePoint),
            &DiscretizationConfig {
                m: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(p.disc.rule.len(), other.disc.rule.len());
        assert!(build_reduced_rule(&sys, &EqpConfig::new(Mode::Ceqp), &other.disc.rule).is_err());
    }
}
