//! Per-window online operators: basis rows at sampled elements, reduced
//! rules and the hyperreduced force evaluation.

use nalgebra::{DMatrix, DVector};

use crate::eqp::beqp_test_functions;
use crate::error::{Error, Result};
use crate::fem::QuadRule;
use crate::hydro::{Discretization, MassMatrices};
use crate::mode::Mode;
use crate::pod::ReducedBasis;
use crate::scalar::Real;

/// Reduced coordinates `(v, e, x)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState<T> {
    pub v: Vec<T>,
    pub e: Vec<T>,
    pub x: Vec<T>,
    pub t: T,
}

impl<T: Real> ReducedState<T> {
    pub fn all_finite(&self) -> bool {
        self.v
            .iter()
            .chain(&self.e)
            .chain(&self.x)
            .all(|v| v.is_finite())
    }
}

/// Basis rows restricted to the DOFs of one sampled element.
#[derive(Clone, Debug)]
struct ElementBlock<T> {
    el: usize,
    v_rows: DMatrix<T>,
    x_rows: DMatrix<T>,
    e_rows: DMatrix<T>,
    v_os: Vec<T>,
    x_os: Vec<T>,
    e_os: Vec<T>,
    /// Basic variant test functions `Psi_v`, `Psi_e` at the element.
    psi_v: Option<DMatrix<T>>,
    psi_e: Option<DMatrix<T>>,
}

#[derive(Clone, Copy, Debug)]
struct SampledPoint<T> {
    j: usize,
    weight: T,
    block: usize,
}

/// Element-local coefficients lifted from reduced coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalFields<T> {
    pub element: usize,
    pub x: Vec<T>,
    pub v: Vec<T>,
    pub e: Vec<T>,
}

/// Reduced forces at one state, plus the CFL time scale over the sampled
/// points and the number of integrand evaluations performed.
#[derive(Clone, Debug)]
pub enum StageEval<T> {
    Beqp {
        f_v: Vec<T>,
        /// `F_e(v') = e_const + e_lin v'`.
        e_const: Vec<T>,
        e_lin: DMatrix<T>,
        evals_v: usize,
        evals_e: usize,
        min_scale: T,
    },
    Ceqp {
        /// `sum_j rho~_j G(x_j)`, `n_v x n_e`.
        f_hat: DMatrix<T>,
        one_hat_e: Vec<T>,
        evals: usize,
        min_scale: T,
    },
}

impl<T: Real> StageEval<T> {
    pub fn velocity_force(&self) -> Vec<T> {
        match self {
            StageEval::Beqp { f_v, .. } => f_v.clone(),
            StageEval::Ceqp {
                f_hat, one_hat_e, ..
            } => (f_hat * DVector::from_column_slice(one_hat_e))
                .as_slice()
                .to_vec(),
        }
    }

    /// Energy force tested against reduced velocity `v_test`.
    pub fn energy_force(&self, v_test: &[T]) -> Vec<T> {
        let vt = DVector::from_column_slice(v_test);
        match self {
            StageEval::Beqp { e_const, e_lin, .. } => {
                let lin = e_lin * vt;
                e_const
                    .iter()
                    .zip(lin.iter())
                    .map(|(a, b)| *a + *b)
                    .collect()
            }
            StageEval::Ceqp { f_hat, .. } => f_hat.tr_mul(&vt).as_slice().to_vec(),
        }
    }

    pub fn min_scale(&self) -> T {
        match self {
            StageEval::Beqp { min_scale, .. } | StageEval::Ceqp { min_scale, .. } => *min_scale,
        }
    }

    /// Integrand evaluations behind this stage (velocity + energy rules for
    /// the basic variant).
    pub fn evals(&self) -> usize {
        match self {
            StageEval::Beqp {
                evals_v, evals_e, ..
            } => evals_v + evals_e,
            StageEval::Ceqp { evals, .. } => *evals,
        }
    }
}

/// Online operators of one window.
#[derive(Clone, Debug)]
pub struct RomWindow<T> {
    pub mode: Mode,
    pub basis: ReducedBasis<T>,
    /// Velocity rule (basic) or the combined rule (conservative), as
    /// `(point, weight)` pairs with nonzero weight.
    pub rule_v: Vec<(usize, T)>,
    /// Energy rule of the basic variant; empty for the conservative one.
    pub rule_e: Vec<(usize, T)>,
    blocks: Vec<ElementBlock<T>>,
    points_v: Vec<SampledPoint<T>>,
    points_e: Vec<SampledPoint<T>>,
    /// `Phi_x^T Phi_v` and `Phi_x^T v_os`.
    pub xv: DMatrix<T>,
    pub x_vos: Vec<T>,
}

fn rows<T: Real>(m: &DMatrix<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
}

fn pick<T: Real>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

fn mat_vec_add<T: Real>(os: &[T], m: &DMatrix<T>, x: &[T]) -> Vec<T> {
    let y = m * DVector::from_column_slice(x);
    os.iter().zip(y.iter()).map(|(a, b)| *a + *b).collect()
}

impl<T: Real> RomWindow<T> {
    /// Assembles the window operators. `rule_e` is required for the basic
    /// variant and must be `None` for the conservative one.
    pub fn new(
        disc: &Discretization<T>,
        mass: &MassMatrices<T>,
        mode: Mode,
        basis: ReducedBasis<T>,
        rule_v: &QuadRule<T>,
        rule_e: Option<&QuadRule<T>>,
    ) -> Result<Self> {
        let (rv, re) = match (mode, rule_e) {
            (Mode::Beqp, Some(re)) => (rule_v.sparse_reduced(), re.sparse_reduced()),
            (Mode::Ceqp, None) => (rule_v.sparse_reduced(), Vec::new()),
            _ => {
                return Err(Error::Config(format!(
                    "{mode} window needs {} rule(s)",
                    if mode == Mode::Beqp { 2 } else { 1 }
                )))
            }
        };
        if mode == Mode::Ceqp && basis.one_hat_e.is_none() {
            return Err(Error::Config(
                "conservative window needs a unity-enriched basis".into(),
            ));
        }
        let psi = match mode {
            Mode::Beqp => Some(beqp_test_functions(&basis, mass)),
            Mode::Ceqp => None,
        };
        Self::assemble(disc, mode, basis, rv, re, psi.as_ref())
    }

    fn assemble(
        disc: &Discretization<T>,
        mode: Mode,
        basis: ReducedBasis<T>,
        rule_v: Vec<(usize, T)>,
        rule_e: Vec<(usize, T)>,
        psi: Option<&(DMatrix<T>, DMatrix<T>)>,
    ) -> Result<Self> {
        let n_q = disc.rule.n_q();
        let mut elements: Vec<usize> = rule_v.iter().chain(&rule_e).map(|(j, _)| j / n_q).collect();
        elements.sort_unstable();
        elements.dedup();
        let blocks: Vec<ElementBlock<T>> = elements
            .iter()
            .map(|&el| {
                let dv = disc.space_v.element_dofs(el);
                let de = disc.space_e.element_dofs(el);
                ElementBlock {
                    el,
                    v_rows: rows(&basis.phi_v, dv),
                    x_rows: rows(&basis.phi_x, dv),
                    e_rows: rows(&basis.phi_e, de),
                    v_os: pick(&basis.v_os, dv),
                    x_os: pick(&basis.x_os, dv),
                    e_os: pick(&basis.e_os, de),
                    psi_v: psi.map(|p| rows(&p.0, dv)),
                    psi_e: psi.map(|p| rows(&p.1, de)),
                }
            })
            .collect();
        let to_points = |rule: &[(usize, T)]| -> Vec<SampledPoint<T>> {
            rule.iter()
                .map(|&(j, weight)| SampledPoint {
                    j,
                    weight,
                    block: elements.binary_search(&(j / n_q)).unwrap_or(0),
                })
                .collect()
        };
        let points_v = to_points(&rule_v);
        let points_e = to_points(&rule_e);
        let xv = basis.phi_x.tr_mul(&basis.phi_v);
        let x_vos = basis
            .phi_x
            .tr_mul(&DVector::from_column_slice(&basis.v_os))
            .as_slice()
            .to_vec();
        Ok(RomWindow {
            mode,
            basis,
            rule_v,
            rule_e,
            blocks,
            points_v,
            points_e,
            xv,
            x_vos,
        })
    }

    /// Rebuilds the sampled rows for an enriched basis of the same window,
    /// keeping the reduced rules (conservative variant).
    pub fn with_basis(&self, disc: &Discretization<T>, basis: ReducedBasis<T>) -> Result<Self> {
        if self.mode != Mode::Ceqp {
            return Err(Error::Config(
                "basis replacement is only used by the conservative variant".into(),
            ));
        }
        Self::assemble(
            disc,
            self.mode,
            basis,
            self.rule_v.clone(),
            self.rule_e.clone(),
            None,
        )
    }

    pub fn window_id(&self) -> usize {
        self.basis.window_id
    }

    /// Nonzero weights of the velocity (or combined) rule.
    pub fn j_hat_v(&self) -> usize {
        self.rule_v.len()
    }

    pub fn j_hat_e(&self) -> usize {
        self.rule_e.len()
    }

    pub fn sampled_elements(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.el).collect()
    }

    /// Element-local fields `offset + Phi w` at the sampled elements only.
    pub fn lift_sampled(&self, s: &ReducedState<T>) -> Vec<LocalFields<T>> {
        self.blocks
            .iter()
            .map(|b| LocalFields {
                element: b.el,
                x: mat_vec_add(&b.x_os, &b.x_rows, &s.x),
                v: mat_vec_add(&b.v_os, &b.v_rows, &s.v),
                e: mat_vec_add(&b.e_os, &b.e_rows, &s.e),
            })
            .collect()
    }

    /// Hyperreduced forces at `s`: only nonzero-weight points are visited.
    pub fn evaluate(&self, disc: &Discretization<T>, s: &ReducedState<T>) -> Result<StageEval<T>> {
        let lifted = self.lift_sampled(s);
        let n_q = disc.rule.n_q();
        let (n_v, n_e) = (self.basis.n_v(), self.basis.n_e());
        let mut f = vec![T::ZERO; disc.space_v.n_local()];
        let mut min_scale = T::max_value().unwrap_or(T::lit(1e300));
        let mut point = |p: &SampledPoint<T>, f: &mut Vec<T>| -> Result<()> {
            let lf = &lifted[p.block];
            let ps = disc.eval_point(p.j, &lf.x, &lf.v, &lf.e)?;
            disc.force_integrand(p.j, &ps, f);
            min_scale = min_scale.min(ps.time_scale());
            Ok(())
        };
        match self.mode {
            Mode::Ceqp => {
                let mut f_hat = DMatrix::zeros(n_v, n_e);
                for p in &self.points_v {
                    point(p, &mut f)?;
                    let b = &self.blocks[p.block];
                    let a = b.v_rows.tr_mul(&DVector::from_column_slice(&f));
                    let th = b
                        .e_rows
                        .tr_mul(&DVector::from_column_slice(disc.tables.e_vals(p.j % n_q)));
                    f_hat.ger(p.weight, &a, &th, T::ONE);
                }
                Ok(StageEval::Ceqp {
                    f_hat,
                    one_hat_e: self.basis.one_hat_e.clone().unwrap_or_default(),
                    evals: self.points_v.len(),
                    min_scale,
                })
            }
            Mode::Beqp => {
                let mut f_v = DVector::zeros(n_v);
                for p in &self.points_v {
                    point(p, &mut f)?;
                    let psi = self.blocks[p.block]
                        .psi_v
                        .as_ref()
                        .expect("basic window has test functions");
                    f_v += psi.tr_mul(&DVector::from_column_slice(&f)) * p.weight;
                }
                let mut e_const = DVector::zeros(n_e);
                let mut e_lin = DMatrix::zeros(n_e, n_v);
                for p in &self.points_e {
                    point(p, &mut f)?;
                    let b = &self.blocks[p.block];
                    let psi_e = b.psi_e.as_ref().expect("basic window has test functions");
                    let fv = DVector::from_column_slice(&f);
                    let u = b.v_rows.tr_mul(&fv);
                    let c = crate::linalg::dot(&f, &b.v_os);
                    let psi =
                        psi_e.tr_mul(&DVector::from_column_slice(disc.tables.e_vals(p.j % n_q)));
                    e_const.axpy(p.weight * c, &psi, T::ONE);
                    e_lin.ger(p.weight, &psi, &u, T::ONE);
                }
                Ok(StageEval::Beqp {
                    f_v: f_v.as_slice().to_vec(),
                    e_const: e_const.as_slice().to_vec(),
                    e_lin,
                    evals_v: self.points_v.len(),
                    evals_e: self.points_e.len(),
                    min_scale,
                })
            }
        }
    }

    /// `Phi_x^T (v_os + Phi_v v)`.
    pub fn position_rate(&self, v: &[T]) -> Vec<T> {
        mat_vec_add(&self.x_vos, &self.xv, v)
    }
}
