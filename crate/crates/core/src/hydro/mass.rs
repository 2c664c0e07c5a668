//! Lagrangian mass matrices, assembled once and factored once.

use super::discretization::Discretization;
use crate::error::Result;
use crate::fem::FemSpace;
use crate::linalg::{BandedCholesky, BandedSym};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct MassMatrices<T> {
    pub m_v: BandedSym<T>,
    pub m_e: BandedSym<T>,
    /// Factor of `M_v` (metric for mass-weighted velocity bases).
    pub chol_v: BandedCholesky<T>,
    /// Factor of `M_v` with wall-normal DOFs replaced by identity rows.
    pub chol_v_constrained: BandedCholesky<T>,
    pub chol_e: BandedCholesky<T>,
    /// `M_e 1`, so that `IE = (M_e 1) . e`.
    pub m_e_unity: Vec<T>,
    pub constrained: Vec<usize>,
    /// `rho0 * rho_j` at every quadrature point, the conserved mass measure.
    pub point_mass: Vec<T>,
}

fn bandwidth<T: Real>(space: &FemSpace<T>) -> usize {
    let mut bw = 0;
    for e in 0..space.n_elements() {
        let d = space.element_dofs(e);
        let lo = d.iter().min().copied().unwrap_or(0);
        let hi = d.iter().max().copied().unwrap_or(0);
        bw = bw.max(hi - lo);
    }
    bw
}

impl<T: Real> MassMatrices<T> {
    /// Solves the velocity system with wall-normal components held at zero.
    pub fn solve_velocity(&self, rhs: &mut [T]) {
        for &d in &self.constrained {
            rhs[d] = T::ZERO;
        }
        self.chol_v_constrained.solve_in_place(rhs);
    }

    pub fn solve_energy(&self, rhs: &mut [T]) {
        self.chol_e.solve_in_place(rhs);
    }

    pub fn internal_energy(&self, e: &[T]) -> T {
        crate::linalg::dot(&self.m_e_unity, e)
    }

    pub fn kinetic_energy(&self, v: &[T]) -> T {
        T::lit(0.5) * self.m_v.inner(v, v)
    }

    pub fn total_mass(&self) -> T {
        self.m_e_unity.iter().copied().sum()
    }
}

/// Assembles `M_v` and `M_e` with the rule of `disc`; density enters via
/// the pointwise invariant `rho |J| = rho0`.
pub fn assemble_mass<T: Real>(disc: &Discretization<T>) -> Result<MassMatrices<T>> {
    let sv = &disc.space_v;
    let se = &disc.space_e;
    let rule = &disc.rule;
    let tables = &disc.tables;
    let n_q = rule.n_q();
    let point_mass: Vec<T> = rule
        .full_weights
        .iter()
        .zip(&disc.rho0)
        .map(|(w, r)| *w * *r)
        .collect();

    let mut m_v = BandedSym::zeros(sv.n_dofs, bandwidth(sv));
    let mut m_e = BandedSym::zeros(se.n_dofs, bandwidth(se));
    let nvn = tables.nv_nodes;
    let nel = tables.ne_loc;
    let mut local_v = vec![T::ZERO; nvn * nvn];
    let mut local_e = vec![T::ZERO; nel * nel];
    for el in 0..sv.n_elements() {
        local_v.iter_mut().for_each(|v| *v = T::ZERO);
        local_e.iter_mut().for_each(|v| *v = T::ZERO);
        for q in 0..n_q {
            let w = point_mass[el * n_q + q];
            let pv = tables.v_vals(q);
            for a in 0..nvn {
                let wa = w * pv[a];
                for b in 0..=a {
                    local_v[a * nvn + b] += wa * pv[b];
                }
            }
            let pe = tables.e_vals(q);
            for a in 0..nel {
                let wa = w * pe[a];
                for b in 0..=a {
                    local_e[a * nel + b] += wa * pe[b];
                }
            }
        }
        let dv = sv.element_dofs(el);
        for a in 0..nvn {
            for b in 0..=a {
                let val = local_v[a * nvn + b];
                for c in 0..2 {
                    let (i, j) = (dv[2 * a + c], dv[2 * b + c]);
                    if a == b || i != j {
                        m_v.add(i, j, val);
                    }
                }
            }
        }
        let de = se.element_dofs(el);
        for a in 0..nel {
            for b in 0..=a {
                m_e.add(de[a], de[b], local_e[a * nel + b]);
            }
        }
    }
    let constrained = sv.constrained_dofs();
    let chol_v = m_v.cholesky()?;
    let chol_v_constrained = m_v.constrained(&constrained).cholesky()?;
    let chol_e = m_e.cholesky()?;
    let m_e_unity = m_e.row_sums();
    Ok(MassMatrices {
        m_v,
        m_e,
        chol_v,
        chol_v_constrained,
        chol_e,
        m_e_unity,
        constrained,
        point_mass,
    })
}

#[cfg(test)]
mod tests {
    use crate::problems::{make_problem, DiscretizationConfig, Problem, ProblemKind, ProblemSpec};

    fn problem(kind: ProblemKind) -> Problem<f64> {
        make_problem(
            ProblemSpec::new(kind),
            &DiscretizationConfig {
                m: 0,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn total_mass_matches_density_integral() {
        let p = problem(ProblemKind::TaylorGreen);
        let area: f64 = p.disc.rule.full_weights.iter().sum();
        assert!((p.mass.total_mass() - area).abs() < 1e-13);
        let t = problem(ProblemKind::TriplePoint);
        let m: f64 = t.mass.point_mass.iter().sum();
        assert!((t.mass.total_mass() - m).abs() < 1e-12 * m);
    }

    #[test]
    fn uniform_velocity_kinetic_energy() {
        let p = problem(ProblemKind::Gresho);
        let v: Vec<f64> = (0..p.disc.n_v())
            .map(|i| if i % 2 == 0 { 2.0 } else { -1.0 })
            .collect();
        let ke = p.mass.kinetic_energy(&v);
        assert!((ke - 0.5 * 5.0 * p.mass.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn constrained_solve_respects_walls() {
        let p = problem(ProblemKind::Sedov);
        let mut rhs = vec![1.0; p.disc.n_v()];
        p.mass.solve_velocity(&mut rhs);
        assert!(!p.mass.constrained.is_empty());
        for &d in &p.mass.constrained {
            assert_eq!(rhs[d], 0.0);
        }
        let back = p.mass.m_v.mul_vec(&rhs);
        let free: Vec<usize> = (0..p.disc.n_v())
            .filter(|i| !p.mass.constrained.contains(i))
            .collect();
        for i in free {
            assert!((back[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_solve_inverts_mass() {
        let p = problem(ProblemKind::TriplePoint);
        let x: Vec<f64> = (0..p.disc.n_e()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = p.mass.m_e.mul_vec(&x);
        p.mass.solve_energy(&mut b);
        assert!(crate::linalg::rel_diff(&b, &x) < 1e-12);
    }
}
