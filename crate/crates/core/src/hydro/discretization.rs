//! Static discretization data shared by the full and reduced models, and
//! the per-point stress kernel both of them evaluate.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::stress::{eval_stress, StressEval, StressModel, Viscosity};
use crate::error::{Error, Result};
use crate::fem::geometry::{inverse2, map_jacobian, min_singular_value, RefTables};
use crate::fem::{
    build_cartesian_mesh, build_fem_space, gauss_rule, Domain, FemSpace, Mesh2D, QuadRule,
    SpaceKind,
};
use crate::scalar::Real;

/// Mesh and space metadata written into file headers for compatibility checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceHeader {
    pub domain: Domain,
    pub m: u32,
    pub h0: f64,
    pub k: usize,
    pub quad_points_per_dim: usize,
    pub n_v: usize,
    pub n_e: usize,
    pub n_quad: usize,
}

/// Everything about the discretization that does not change in time.
#[derive(Clone, Debug)]
pub struct Discretization<T> {
    pub mesh: Mesh2D<T>,
    pub space_v: FemSpace<T>,
    pub space_e: FemSpace<T>,
    pub rule: QuadRule<T>,
    pub tables: RefTables<T>,
    pub x0: Vec<T>,
    /// Initial density at every quadrature point.
    pub rho0: Vec<T>,
    /// Initial element-map determinant at every quadrature point.
    pub det_a0: Vec<T>,
    pub model: StressModel<T>,
}

/// State-dependent quantities at one quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct PointState<T> {
    pub stress: StressEval<T>,
    /// `|J| = det(grad_{x0} x)`.
    pub det_j: T,
    pub rho: T,
    pub a_inv: Matrix2<T>,
    pub grad_v: Matrix2<T>,
    /// Velocity at the point.
    pub velocity: [T; 2],
    /// Length scale `2 sigma_min(dx/dxi) / k`.
    pub length: T,
}

impl<T: Real> PointState<T> {
    /// `sigma : grad v`.
    pub fn stress_power(&self) -> T {
        let s = &self.stress.sigma;
        let g = &self.grad_v;
        s[(0, 0)] * g[(0, 0)]
            + s[(0, 1)] * g[(0, 1)]
            + s[(1, 0)] * g[(1, 0)]
            + s[(1, 1)] * g[(1, 1)]
    }

    /// CFL time scale `1 / ((c_s + |v|) / l + 2.5 mu / (rho l^2))`; the
    /// second term bounds the explicit viscous step.
    pub fn time_scale(&self) -> T {
        let speed = self.stress.sound_speed
            + (self.velocity[0] * self.velocity[0] + self.velocity[1] * self.velocity[1]).sqrt();
        let l = self.length;
        let rate = speed / l + T::lit(2.5) * self.stress.mu / (self.rho * l * l);
        if rate > T::ZERO {
            T::ONE / rate
        } else {
            T::max_value().unwrap_or(T::lit(1e300))
        }
    }
}

impl<T: Real> Discretization<T> {
    /// Builds mesh, spaces and rule; `rho0` and `gamma` are sampled at the
    /// initial position of every quadrature point.
    pub fn new(
        domain: Domain,
        m: u32,
        h0: f64,
        k: usize,
        points_per_dim: usize,
        rho0: impl Fn([T; 2]) -> T,
        gamma: impl Fn([T; 2]) -> T,
        viscosity: Viscosity<T>,
    ) -> Result<Self> {
        let mesh = build_cartesian_mesh::<T>(domain, m, h0)?;
        let space_v = build_fem_space(&mesh, SpaceKind::Kinematic, k)?;
        let space_e = build_fem_space(&mesh, SpaceKind::Thermodynamic, k)?;
        let rule = gauss_rule(&mesh, points_per_dim);
        let tables = RefTables::new(&space_v, &space_e, &rule);
        let x0 = space_v.initial_positions();
        let n_q = rule.n_q();
        let mut rho0_pts = Vec::with_capacity(rule.len());
        let mut gamma_pts = Vec::with_capacity(rule.len());
        let mut det_a0 = Vec::with_capacity(rule.len());
        let mut xl = Vec::new();
        for e in 0..mesh.n_elements() {
            crate::fem::geometry::gather(&x0, space_v.element_dofs(e), &mut xl);
            for q in 0..n_q {
                let a0 = map_jacobian(&tables, q, &xl);
                det_a0.push(a0.determinant());
                let vals = tables.v_vals(q);
                let mut p = [T::ZERO; 2];
                for (n, phi) in vals.iter().enumerate() {
                    p[0] += xl[2 * n] * *phi;
                    p[1] += xl[2 * n + 1] * *phi;
                }
                let r = rho0(p);
                let g = gamma(p);
                if !(r > T::ZERO) {
                    return Err(Error::Config(format!(
                        "initial density must be positive, got {}",
                        r.to_f64_()
                    )));
                }
                if !(g > T::ONE) {
                    return Err(Error::Config(format!(
                        "adiabatic index must exceed 1, got {}",
                        g.to_f64_()
                    )));
                }
                rho0_pts.push(r);
                gamma_pts.push(g);
            }
        }
        Ok(Discretization {
            mesh,
            space_v,
            space_e,
            rule,
            tables,
            x0,
            rho0: rho0_pts,
            det_a0,
            model: StressModel {
                gamma: gamma_pts,
                viscosity,
            },
        })
    }

    pub fn n_v(&self) -> usize {
        self.space_v.n_dofs
    }

    pub fn n_e(&self) -> usize {
        self.space_e.n_dofs
    }

    pub fn header(&self) -> SpaceHeader {
        SpaceHeader {
            domain: self.mesh.domain,
            m: self.mesh.refinement,
            h0: self.mesh.h0,
            k: self.space_v.poly_order,
            quad_points_per_dim: self.rule.points_per_dim,
            n_v: self.n_v(),
            n_e: self.n_e(),
            n_quad: self.rule.len(),
        }
    }

    /// Initial position of quadrature point `j`.
    pub fn point_position0(&self, j: usize) -> [T; 2] {
        let e = self.rule.element_of(j);
        let q = self.rule.local_of(j);
        let dofs = self.space_v.element_dofs(e);
        let mut p = [T::ZERO; 2];
        for (n, phi) in self.tables.v_vals(q).iter().enumerate() {
            p[0] += self.x0[dofs[2 * n]] * *phi;
            p[1] += self.x0[dofs[2 * n + 1]] * *phi;
        }
        p
    }

    /// Evaluates the state at global point `j` from local element
    /// coefficients (`x`, `v` interleaved kinematic; `e` thermodynamic).
    pub fn eval_point(
        &self,
        j: usize,
        x_loc: &[T],
        v_loc: &[T],
        e_loc: &[T],
    ) -> Result<PointState<T>> {
        let q = self.rule.local_of(j);
        let a = map_jacobian(&self.tables, q, x_loc);
        let det_a = a.determinant();
        if !(det_a > T::ZERO) {
            return Err(Error::Tangled {
                elem: self.rule.element_of(j),
                point: q,
                det: det_a.to_f64_(),
            });
        }
        let a_inv = inverse2(&a, det_a);
        let grad_v = map_jacobian(&self.tables, q, v_loc) * a_inv;
        let det_j = det_a / self.det_a0[j];
        let rho = self.rho0[j] / det_j;
        let e_val: T = self
            .tables
            .e_vals(q)
            .iter()
            .zip(e_loc)
            .map(|(p, c)| *p * *c)
            .sum();
        let mut velocity = [T::ZERO; 2];
        for (n, phi) in self.tables.v_vals(q).iter().enumerate() {
            velocity[0] += v_loc[2 * n] * *phi;
            velocity[1] += v_loc[2 * n + 1] * *phi;
        }
        let k = T::from_usize_(self.space_v.poly_order);
        let length = T::lit(2.0) * min_singular_value(&a) / k;
        let stress = eval_stress(
            &self.model.viscosity,
            self.model.gamma[j],
            rho,
            e_val,
            &grad_v,
            length,
        );
        Ok(PointState {
            stress,
            det_j,
            rho,
            a_inv,
            grad_v,
            velocity,
            length,
        })
    }

    /// Writes `|J| sigma : grad(theta_(n,c))` for every local kinematic DOF
    /// `2n + c` of the element owning point `j` into `out`.
    pub fn force_integrand(&self, j: usize, ps: &PointState<T>, out: &mut [T]) {
        let q = self.rule.local_of(j);
        let s = &ps.stress.sigma;
        let ai = &ps.a_inv;
        for (n, g) in self.tables.v_grads(q).iter().enumerate() {
            // physical gradient = A^{-T} grad_xi
            let gx = ai[(0, 0)] * g[0] + ai[(1, 0)] * g[1];
            let gy = ai[(0, 1)] * g[0] + ai[(1, 1)] * g[1];
            out[2 * n] = ps.det_j * (s[(0, 0)] * gx + s[(0, 1)] * gy);
            out[2 * n + 1] = ps.det_j * (s[(1, 0)] * gx + s[(1, 1)] * gy);
        }
    }
}
