//! Accuracy-constraint systems built from training snapshots.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::geometry::gather;
use crate::hydro::{Discretization, FullState, MassMatrices};
use crate::nnls::ConstraintSystem;
use crate::pod::{BasisMetric, ReducedBasis, SnapshotSet};
use crate::scalar::Real;

/// Per-row thresholds: relative to `|b_s|` or given explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thresholds {
    Relative(f64),
    Absolute(Vec<f64>),
}

/// Floor on `|b_s|`, relative to `max |b|`, used by relative thresholds.
pub const B_FLOOR: f64 = 1e-12;

/// Floor on `|b_s|` relative to the largest `|b|` of the same snapshot and
/// field, so each reduced force vector is matched to a relative accuracy.
pub const BLOCK_FLOOR: f64 = 1.0;

impl Thresholds {
    /// `eps_s = max(eps_rel * max(|b_s|, B_FLOOR * max|b|, BLOCK_FLOOR * max_block|b|), J u a_s)`
    /// or the explicit list. `blocks[s]` is the block id of row `s`. `a_s = sum_j |C_sj| rho_j` bounds the rounding error of
    /// `b_s` itself, so no relative threshold is set below it.
    pub fn resolve<T: Real>(
        &self,
        b: &[T],
        abs_integrals: &[T],
        blocks: &[usize],
        n_points: usize,
    ) -> Result<Vec<T>> {
        match self {
            Thresholds::Relative(rel) => {
                if !(*rel > 0.0) {
                    return Err(Error::Config(format!(
                        "relative threshold must be positive, got {rel}"
                    )));
                }
                if abs_integrals.len() != b.len() {
                    return Err(Error::Dimension(format!(
                        "{} row scales for {} constraints",
                        abs_integrals.len(),
                        b.len()
                    )));
                }
                let bmax = b.iter().fold(T::ZERO, |m, v| m.max(v.abs()));
                let floor = (T::lit(B_FLOOR) * bmax).max(T::lit(f64::MIN_POSITIVE));
                let n_blocks = blocks.iter().max().map_or(0, |m| m + 1);
                let mut block_max = vec![T::ZERO; n_blocks];
                for (v, &k) in b.iter().zip(blocks) {
                    block_max[k] = block_max[k].max(v.abs());
                }
                let round = T::from_usize_(n_points) * T::EPS;
                Ok(b.iter()
                    .zip(abs_integrals)
                    .zip(blocks)
                    .map(|((v, a), &k)| {
                        let scale = v.abs().max(floor).max(T::lit(BLOCK_FLOOR) * block_max[k]);
                        (T::lit(*rel) * scale).max(round * *a)
                    })
                    .collect())
            }
            Thresholds::Absolute(eps) => {
                if eps.len() != b.len() {
                    return Err(Error::Dimension(format!(
                        "{} thresholds for {} constraints",
                        eps.len(),
                        b.len()
                    )));
                }
                Ok(eps.iter().map(|e| T::lit(*e)).collect())
            }
        }
    }
}

/// Test functions of the basic variant: `Psi_v = M_v^{-1} Phi_v` (with the
/// wall constraints) and `Psi_e = M_e^{-1} Phi_e`.
pub fn beqp_test_functions<T: Real>(
    basis: &ReducedBasis<T>,
    mass: &MassMatrices<T>,
) -> (DMatrix<T>, DMatrix<T>) {
    let mut psi_v = basis.phi_v.clone();
    for mut c in psi_v.column_iter_mut() {
        let mut col: Vec<T> = c.iter().copied().collect();
        mass.solve_velocity(&mut col);
        c.copy_from_slice(&col);
    }
    let mut psi_e = basis.phi_e.clone();
    for mut c in psi_e.column_iter_mut() {
        let mut col: Vec<T> = c.iter().copied().collect();
        mass.solve_energy(&mut col);
        c.copy_from_slice(&col);
    }
    (psi_v, psi_e)
}

/// Visits every quadrature point of `state` with the local force integrand
/// `|J| sigma : grad theta_a` and the test power `|J| sigma : grad v_test`.
pub fn visit_points<T: Real>(
    disc: &Discretization<T>,
    state: &FullState<T>,
    v_test: &[T],
    mut f: impl FnMut(usize, usize, &[T], T),
) -> Result<()> {
    let n_q = disc.rule.n_q();
    let (mut xl, mut vl, mut el, mut tl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut fl = vec![T::ZERO; disc.space_v.n_local()];
    for e in 0..disc.space_v.n_elements() {
        let dv = disc.space_v.element_dofs(e);
        gather(&state.x, dv, &mut xl);
        gather(&state.v, dv, &mut vl);
        gather(v_test, dv, &mut tl);
        gather(&state.e, disc.space_e.element_dofs(e), &mut el);
        for q in 0..n_q {
            let j = e * n_q + q;
            let ps = disc.eval_point(j, &xl, &vl, &el)?;
            disc.force_integrand(j, &ps, &mut fl);
            let power = crate::linalg::dot(&fl, &tl);
            f(j, e, &fl, power);
        }
    }
    Ok(())
}

fn check_sizes<T: Real>(disc: &Discretization<T>, snaps: &SnapshotSet<T>) -> Result<()> {
    snaps.validate()?;
    let s = &snaps.states[0];
    if s.v.len() != disc.n_v() || s.e.len() != disc.n_e() {
        return Err(Error::Dimension(format!(
            "snapshots have N_v={}, N_e={}; discretization {} and {}",
            s.v.len(),
            s.e.len(),
            disc.n_v(),
            disc.n_e()
        )));
    }
    Ok(())
}

/// Writes velocity rows `row0 + i + k * n` for `n` test columns.
fn fill_velocity_rows<T: Real>(
    c: &mut DMatrix<T>,
    row0: usize,
    disc: &Discretization<T>,
    test: &DMatrix<T>,
    snaps: &SnapshotSet<T>,
) -> Result<()> {
    let n = test.ncols();
    for (k, s) in snaps.states.iter().enumerate() {
        visit_points(disc, s, snaps.test_velocity(k), |j, e, fl, _| {
            let dofs = disc.space_v.element_dofs(e);
            for i in 0..n {
                let col = test.column(i);
                let g: T = fl.iter().zip(dofs).map(|(f, d)| *f * col[*d]).sum();
                c[(row0 + i + k * n, j)] = g;
            }
        })?;
    }
    Ok(())
}

/// Writes energy rows `row0 + i + k * n` for `n` test columns.
fn fill_energy_rows<T: Real>(
    c: &mut DMatrix<T>,
    row0: usize,
    disc: &Discretization<T>,
    test: &DMatrix<T>,
    snaps: &SnapshotSet<T>,
) -> Result<()> {
    let n = test.ncols();
    let n_q = disc.rule.n_q();
    for (k, s) in snaps.states.iter().enumerate() {
        visit_points(disc, s, snaps.test_velocity(k), |j, e, _, power| {
            let dofs = disc.space_e.element_dofs(e);
            let ev = disc.tables.e_vals(j % n_q);
            for i in 0..n {
                let col = test.column(i);
                let psi: T = ev.iter().zip(dofs).map(|(p, d)| *p * col[*d]).sum();
                c[(row0 + i + k * n, j)] = power * psi;
            }
        })?;
    }
    Ok(())
}

/// Block id of every row: blocks of `len` consecutive rows, one per
/// snapshot and field.
fn row_blocks(sizes: &[(usize, usize)]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut id = 0;
    for &(len, count) in sizes {
        for _ in 0..count {
            out.extend(std::iter::repeat_n(id, len));
            id += 1;
        }
    }
    out
}

fn finish<T: Real>(
    c: DMatrix<T>,
    disc: &Discretization<T>,
    thresholds: &Thresholds,
    blocks: &[usize],
) -> Result<ConstraintSystem<T>> {
    let rho = nalgebra::DVector::from_column_slice(&disc.rule.full_weights);
    let b = (&c * &rho).as_slice().to_vec();
    let a = (c.abs() * &rho).as_slice().to_vec();
    let eps = thresholds.resolve(&b, &a, blocks, disc.rule.len())?;
    ConstraintSystem::new(c, b, eps)
}

/// Velocity constraints of the basic variant: row `i + k n_v` holds
/// `sigma(w_k) : grad psi_i^v` at every point; `b = C rho`.
pub fn assemble_beqp_system_v<T: Real>(
    disc: &Discretization<T>,
    psi_v: &DMatrix<T>,
    snaps: &SnapshotSet<T>,
    thresholds: &Thresholds,
) -> Result<ConstraintSystem<T>> {
    check_sizes(disc, snaps)?;
    let mut c = DMatrix::zeros(psi_v.ncols() * snaps.len(), disc.rule.len());
    fill_velocity_rows(&mut c, 0, disc, psi_v, snaps)?;
    finish(
        c,
        disc,
        thresholds,
        &row_blocks(&[(psi_v.ncols(), snaps.len())]),
    )
}

/// Energy constraints of the basic variant: row `i + k n_e` holds
/// `(sigma(w_k) : grad v_k) psi_i^e`.
pub fn assemble_beqp_system_e<T: Real>(
    disc: &Discretization<T>,
    psi_e: &DMatrix<T>,
    snaps: &SnapshotSet<T>,
    thresholds: &Thresholds,
) -> Result<ConstraintSystem<T>> {
    check_sizes(disc, snaps)?;
    let mut c = DMatrix::zeros(psi_e.ncols() * snaps.len(), disc.rule.len());
    fill_energy_rows(&mut c, 0, disc, psi_e, snaps)?;
    finish(
        c,
        disc,
        thresholds,
        &row_blocks(&[(psi_e.ncols(), snaps.len())]),
    )
}

/// Combined constraints of the conservative variant: the first `n_v N_t`
/// rows are velocity rows, then `n_v N_t + i + k n_e` energy rows, all over
/// one point set.
pub fn assemble_ceqp_system<T: Real>(
    disc: &Discretization<T>,
    basis: &ReducedBasis<T>,
    snaps: &SnapshotSet<T>,
    thresholds: &Thresholds,
) -> Result<ConstraintSystem<T>> {
    check_sizes(disc, snaps)?;
    if basis.metric != BasisMetric::MassWeighted || basis.one_hat_e.is_none() {
        return Err(Error::Config(
            "conservative constraints need a mass-weighted, unity-enriched basis".into(),
        ));
    }
    let nt = snaps.len();
    let nv_rows = basis.n_v() * nt;
    let mut c = DMatrix::zeros(nv_rows + basis.n_e() * nt, disc.rule.len());
    fill_velocity_rows(&mut c, 0, disc, &basis.phi_v, snaps)?;
    fill_energy_rows(&mut c, nv_rows, disc, &basis.phi_e, snaps)?;
    finish(
        c,
        disc,
        thresholds,
        &row_blocks(&[(basis.n_v(), nt), (basis.n_e(), nt)]),
    )
}
