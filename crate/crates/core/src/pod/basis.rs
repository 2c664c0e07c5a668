//! Per-window reduced bases.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mgs::{columns_of, matrix_from_columns, mgs2_append, mgs2_orthonormalize, Metric};
use super::snapshots::SnapshotSet;
use super::svd::{pod_basis, PodMetric};
use crate::error::{Error, Result};
use crate::hydro::{FullState, MassMatrices};
use crate::mode::Mode;
use crate::scalar::Real;

/// Inner product in which `Phi_v` and `Phi_e` are orthonormal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMetric {
    Euclidean,
    MassWeighted,
}

/// Offset vectors used with the basic variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetPolicy {
    #[default]
    Zero,
    /// The window's first snapshot.
    InitialCondition,
}

#[derive(Clone, Debug)]
pub struct ReducedBasis<T> {
    pub window_id: usize,
    pub metric: BasisMetric,
    pub phi_v: DMatrix<T>,
    pub phi_e: DMatrix<T>,
    /// Always Euclidean-orthonormal.
    pub phi_x: DMatrix<T>,
    pub v_os: Vec<T>,
    pub e_os: Vec<T>,
    pub x_os: Vec<T>,
    /// Coordinates of the energy unity, `Phi_e^T M_e 1` (mass-weighted only).
    pub one_hat_e: Option<Vec<T>>,
}

fn mat_vec<T: Real>(a: &DMatrix<T>, x: &[T]) -> Vec<T> {
    (a * DVector::from_column_slice(x)).as_slice().to_vec()
}

fn mat_tr_vec<T: Real>(a: &DMatrix<T>, x: &[T]) -> Vec<T> {
    a.tr_mul(&DVector::from_column_slice(x)).as_slice().to_vec()
}

fn with_offset<T: Real>(os: &[T], mut y: Vec<T>) -> Vec<T> {
    y.iter_mut().zip(os).for_each(|(a, b)| *a += *b);
    y
}

fn minus<T: Real>(x: &[T], os: &[T]) -> Vec<T> {
    x.iter().zip(os).map(|(a, b)| *a - *b).collect()
}

impl<T: Real> ReducedBasis<T> {
    pub fn n_v(&self) -> usize {
        self.phi_v.ncols()
    }

    pub fn n_e(&self) -> usize {
        self.phi_e.ncols()
    }

    pub fn n_x(&self) -> usize {
        self.phi_x.ncols()
    }

    pub fn lift_v(&self, v_hat: &[T]) -> Vec<T> {
        with_offset(&self.v_os, mat_vec(&self.phi_v, v_hat))
    }

    pub fn lift_e(&self, e_hat: &[T]) -> Vec<T> {
        with_offset(&self.e_os, mat_vec(&self.phi_e, e_hat))
    }

    pub fn lift_x(&self, x_hat: &[T]) -> Vec<T> {
        with_offset(&self.x_os, mat_vec(&self.phi_x, x_hat))
    }

    /// Orthogonal projection of a full velocity onto the basis in its
    /// metric.
    pub fn project_v(&self, v: &[T], mass: &MassMatrices<T>) -> Vec<T> {
        let d = minus(v, &self.v_os);
        match self.metric {
            BasisMetric::Euclidean => mat_tr_vec(&self.phi_v, &d),
            BasisMetric::MassWeighted => mat_tr_vec(&self.phi_v, &mass.m_v.mul_vec(&d)),
        }
    }

    pub fn project_e(&self, e: &[T], mass: &MassMatrices<T>) -> Vec<T> {
        let d = minus(e, &self.e_os);
        match self.metric {
            BasisMetric::Euclidean => mat_tr_vec(&self.phi_e, &d),
            BasisMetric::MassWeighted => mat_tr_vec(&self.phi_e, &mass.m_e.mul_vec(&d)),
        }
    }

    pub fn project_x(&self, x: &[T]) -> Vec<T> {
        mat_tr_vec(&self.phi_x, &minus(x, &self.x_os))
    }

    /// Lift of a reduced `(v, e, x)` triple at time `t`.
    pub fn lift(&self, v_hat: &[T], e_hat: &[T], x_hat: &[T], t: T) -> FullState<T> {
        FullState {
            v: self.lift_v(v_hat),
            e: self.lift_e(e_hat),
            x: self.lift_x(x_hat),
            t,
        }
    }

    /// Largest deviation of `Phi^T W Phi` from the identity over the three
    /// bases, `W` being the declared metric.
    pub fn orthonormality_error(&self, mass: &MassMatrices<T>) -> T {
        let gram_err = |phi: &DMatrix<T>, apply: &dyn Fn(&[T]) -> Vec<T>| {
            let cols = columns_of(phi);
            let mut worst = T::ZERO;
            for (i, ci) in cols.iter().enumerate() {
                let wi = apply(ci);
                for (j, cj) in cols.iter().enumerate() {
                    let g = crate::linalg::dot(&wi, cj);
                    let target = if i == j { T::ONE } else { T::ZERO };
                    worst = worst.max((g - target).abs());
                }
            }
            worst
        };
        let ident = |x: &[T]| x.to_vec();
        let (ev, ee): (T, T) = match self.metric {
            BasisMetric::Euclidean => {
                (gram_err(&self.phi_v, &ident), gram_err(&self.phi_e, &ident))
            }
            BasisMetric::MassWeighted => (
                gram_err(&self.phi_v, &|x| mass.m_v.mul_vec(x)),
                gram_err(&self.phi_e, &|x| mass.m_e.mul_vec(x)),
            ),
        };
        ev.max(ee).max(gram_err(&self.phi_x, &ident))
    }

    /// `||Phi_e 1hat_e - 1|| / ||1||`, or `None` without a unity coordinate.
    pub fn unity_residual(&self) -> Option<T> {
        let one_hat = self.one_hat_e.as_ref()?;
        let lifted = mat_vec(&self.phi_e, one_hat);
        let n = lifted.len();
        let err: T = lifted
            .iter()
            .map(|u| (*u - T::ONE) * (*u - T::ONE))
            .sum::<T>()
            .sqrt();
        Some(err / T::from_usize_(n).sqrt())
    }

    fn refresh_unity(&mut self, mass: &MassMatrices<T>) {
        if self.metric == BasisMetric::MassWeighted {
            self.one_hat_e = Some(mat_tr_vec(&self.phi_e, &mass.m_e_unity));
        }
    }
}

/// Builds the bases of one window from its snapshots.
///
/// Basic mode: Euclidean POD of each field, offsets per `offsets`. Conservative
/// mode: mass-weighted POD of velocity and energy, the energy unity
/// prepended to `Phi_e`, zero offsets.
pub fn build_window_bases<T: Real>(
    snaps: &SnapshotSet<T>,
    e_sigma: f64,
    mode: Mode,
    mass: &MassMatrices<T>,
    offsets: OffsetPolicy,
) -> Result<ReducedBasis<T>> {
    snaps.validate()?;
    let first = &snaps.states[0];
    let (n_v, n_e) = (first.v.len(), first.e.len());
    if mass.m_v.dim() != n_v || mass.m_e.dim() != n_e {
        return Err(Error::Dimension(format!(
            "snapshots have N_v={n_v}, N_e={n_e}; mass matrices {}x{}",
            mass.m_v.dim(),
            mass.m_e.dim()
        )));
    }
    let (v_os, e_os, x_os) = match (mode, offsets) {
        (Mode::Beqp, OffsetPolicy::InitialCondition) => {
            (first.v.clone(), first.e.clone(), first.x.clone())
        }
        _ => (vec![T::ZERO; n_v], vec![T::ZERO; n_e], vec![T::ZERO; n_v]),
    };
    let centered = |m: DMatrix<T>, os: &[T]| {
        let mut m = m;
        for mut c in m.column_iter_mut() {
            c.iter_mut().zip(os).for_each(|(a, b)| *a -= *b);
        }
        m
    };
    let dv = centered(snaps.velocity_matrix(), &v_os);
    let de = centered(snaps.energy_matrix(), &e_os);
    let dx = centered(snaps.position_matrix(), &x_os);

    // Wall-normal velocity components are zero in every snapshot; clear
    // the rounding the POD leaves there before orthonormalizing.
    let wall_free = |m: &DMatrix<T>| {
        let mut cols = columns_of(m);
        for c in &mut cols {
            for &d in &mass.constrained {
                c[d] = T::ZERO;
            }
        }
        cols
    };

    let pod_x = pod_basis(&dx, e_sigma, PodMetric::Euclidean);
    let phi_x = matrix_from_columns(
        n_v,
        &mgs2_orthonormalize(&columns_of(&pod_x.basis), Metric::Euclidean),
    );

    let mut basis = match mode {
        Mode::Beqp => {
            let pv = pod_basis(&dv, e_sigma, PodMetric::Euclidean);
            let pe = pod_basis(&de, e_sigma, PodMetric::Euclidean);
            ReducedBasis {
                window_id: snaps.window_id,
                metric: BasisMetric::Euclidean,
                phi_v: matrix_from_columns(
                    n_v,
                    &mgs2_orthonormalize(&wall_free(&pv.basis), Metric::Euclidean),
                ),
                phi_e: matrix_from_columns(
                    n_e,
                    &mgs2_orthonormalize(&columns_of(&pe.basis), Metric::Euclidean),
                ),
                phi_x,
                v_os,
                e_os,
                x_os,
                one_hat_e: None,
            }
        }
        Mode::Ceqp => {
            let pv = pod_basis(&dv, e_sigma, PodMetric::Mass(&mass.chol_v));
            let pe = pod_basis(&de, e_sigma, PodMetric::Mass(&mass.chol_e));
            let vcols = mgs2_orthonormalize(&wall_free(&pv.basis), Metric::Mass(&mass.m_v));
            let mut ecols = vec![vec![T::ONE; n_e]];
            ecols.extend(columns_of(&pe.basis));
            let ecols = mgs2_orthonormalize(&ecols, Metric::Mass(&mass.m_e));
            ReducedBasis {
                window_id: snaps.window_id,
                metric: BasisMetric::MassWeighted,
                phi_v: matrix_from_columns(n_v, &vcols),
                phi_e: matrix_from_columns(n_e, &ecols),
                phi_x,
                v_os,
                e_os,
                x_os,
                one_hat_e: None,
            }
        }
    };
    basis.refresh_unity(mass);
    Ok(basis)
}

/// Appends the given carried full fields to the bases of window `n >= 1`
/// and re-orthonormalizes so that they are exactly representable. Fields
/// already in span leave the basis unchanged.
pub fn enrich_window_transition<T: Real>(
    basis: &ReducedBasis<T>,
    carry_v: Option<&[T]>,
    carry_e: Option<&[T]>,
    carry_x: Option<&[T]>,
    mass: &MassMatrices<T>,
) -> ReducedBasis<T> {
    let mut out = basis.clone();
    let (mv, me) = match basis.metric {
        BasisMetric::Euclidean => (Metric::Euclidean, Metric::Euclidean),
        BasisMetric::MassWeighted => (Metric::Mass(&mass.m_v), Metric::Mass(&mass.m_e)),
    };
    let append = |phi: &DMatrix<T>, carry: Vec<T>, metric: Metric<'_, T>| {
        let mut cols = columns_of(phi);
        if mgs2_append(&mut cols, carry, metric) {
            matrix_from_columns(phi.nrows(), &cols)
        } else {
            phi.clone()
        }
    };
    if let Some(v) = carry_v {
        out.phi_v = append(&basis.phi_v, minus(v, &basis.v_os), mv);
    }
    if let Some(e) = carry_e {
        out.phi_e = append(&basis.phi_e, minus(e, &basis.e_os), me);
    }
    if let Some(x) = carry_x {
        out.phi_x = append(&basis.phi_x, minus(x, &basis.x_os), Metric::Euclidean);
    }
    out.refresh_unity(mass);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{run_offline, OfflineRun, SimConfig};
    use crate::linalg::rel_diff;
    use crate::problems::{make_problem, DiscretizationConfig, Problem, ProblemKind, ProblemSpec};

    fn trained(kind: ProblemKind) -> (Problem<f64>, OfflineRun) {
        let spec = ProblemSpec::new(kind);
        let p = make_problem(
            spec,
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
        (p, run)
    }

    #[test]
    fn conservative_basis_properties() {
        let (p, run) = trained(ProblemKind::Sedov);
        let b = build_window_bases(
            &run.snapshots[0],
            0.9999,
            Mode::Ceqp,
            &p.mass,
            OffsetPolicy::Zero,
        )
        .unwrap();
        assert_eq!(b.metric, BasisMetric::MassWeighted);
        assert!(b.orthonormality_error(&p.mass) < 1e-12);
        assert!(b.unity_residual().unwrap() < 1e-12);
        for &d in &p.mass.constrained {
            assert!(b.phi_v.row(d).iter().all(|v| *v == 0.0));
        }
        let pt = b.phi_x.transpose() * &b.phi_x;
        assert!((pt - DMatrix::identity(b.n_x(), b.n_x())).norm() < 1e-12);
    }

    #[test]
    fn full_energy_ratio_reproduces_snapshots() {
        let (p, run) = trained(ProblemKind::Gresho);
        let snaps = &run.snapshots[0];
        for mode in Mode::ALL {
            let b = build_window_bases(snaps, 1.0, mode, &p.mass, OffsetPolicy::Zero).unwrap();
            for s in &snaps.states {
                let back = b.lift(
                    &b.project_v(&s.v, &p.mass),
                    &b.project_e(&s.e, &p.mass),
                    &b.project_x(&s.x),
                    s.t,
                );
                assert!(rel_diff(&back.v, &s.v) < 1e-10, "{mode}");
                assert!(rel_diff(&back.e, &s.e) < 1e-10, "{mode}");
                assert!(rel_diff(&back.x, &s.x) < 1e-10, "{mode}");
            }
        }
    }

    #[test]
    fn initial_condition_offsets() {
        let (p, run) = trained(ProblemKind::TaylorGreen);
        let snaps = &run.snapshots[0];
        let b = build_window_bases(
            snaps,
            0.99,
            Mode::Beqp,
            &p.mass,
            OffsetPolicy::InitialCondition,
        )
        .unwrap();
        let first = &snaps.states[0];
        assert_eq!(b.e_os, first.e);
        let e_hat = b.project_e(&first.e, &p.mass);
        assert!(crate::linalg::norm2(&e_hat) < 1e-12);
        assert!(rel_diff(&b.lift_e(&e_hat), &first.e) < 1e-14);
    }

    #[test]
    fn enrichment_makes_carried_field_exact() {
        let (p, run) = trained(ProblemKind::Sedov);
        assert!(run.snapshots.len() >= 2, "{} steps", run.stats.steps);
        let b = build_window_bases(
            &run.snapshots[1],
            0.99,
            Mode::Ceqp,
            &p.mass,
            OffsetPolicy::Zero,
        )
        .unwrap();
        let carried = &run.snapshots[0].states[3];
        let before = rel_diff(&b.lift_e(&b.project_e(&carried.e, &p.mass)), &carried.e);
        let enriched =
            enrich_window_transition(&b, Some(&carried.v), Some(&carried.e), None, &p.mass);
        assert_eq!(enriched.n_e(), b.n_e() + usize::from(before > 1e-10));
        assert!(
            rel_diff(
                &enriched.lift_e(&enriched.project_e(&carried.e, &p.mass)),
                &carried.e
            ) < 1e-10
        );
        assert!(
            rel_diff(
                &enriched.lift_v(&enriched.project_v(&carried.v, &p.mass)),
                &carried.v
            ) < 1e-10
        );
        assert!(enriched.orthonormality_error(&p.mass) < 1e-12);
        assert!(enriched.unity_residual().unwrap() < 1e-12);
        let again = enrich_window_transition(&enriched, None, Some(&carried.e), None, &p.mass);
        assert_eq!(again.n_e(), enriched.n_e());
    }
}
