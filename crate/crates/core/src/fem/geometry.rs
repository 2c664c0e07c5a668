//! Reference-element tables and geometric kernels (element map Jacobian,
//! deformation gradient, physical basis gradients).

use nalgebra::Matrix2;

use super::quadrature::QuadRule;
use super::space::FemSpace;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Basis values and reference gradients at every reference quadrature point.
#[derive(Clone, Debug)]
pub struct RefTables<T> {
    pub n_q: usize,
    /// Scalar kinematic basis functions per element, `(k+1)^2`.
    pub nv_nodes: usize,
    pub ne_loc: usize,
    v_vals: Vec<T>,
    v_grads: Vec<[T; 2]>,
    e_vals: Vec<T>,
}

impl<T: Real> RefTables<T> {
    pub fn new(space_v: &FemSpace<T>, space_e: &FemSpace<T>, rule: &QuadRule<T>) -> Self {
        let n_q = rule.n_q();
        let nv_nodes = space_v.basis.len();
        let ne_loc = space_e.basis.len();
        let mut v_vals = Vec::with_capacity(n_q * nv_nodes);
        let mut v_grads = Vec::with_capacity(n_q * nv_nodes);
        let mut e_vals = Vec::with_capacity(n_q * ne_loc);
        for xi in &rule.ref_points {
            v_vals.extend(space_v.basis.values(*xi));
            v_grads.extend(space_v.basis.gradients(*xi));
            e_vals.extend(space_e.basis.values(*xi));
        }
        RefTables {
            n_q,
            nv_nodes,
            ne_loc,
            v_vals,
            v_grads,
            e_vals,
        }
    }

    #[inline]
    pub fn v_vals(&self, q: usize) -> &[T] {
        &self.v_vals[q * self.nv_nodes..(q + 1) * self.nv_nodes]
    }

    #[inline]
    pub fn v_grads(&self, q: usize) -> &[[T; 2]] {
        &self.v_grads[q * self.nv_nodes..(q + 1) * self.nv_nodes]
    }

    #[inline]
    pub fn e_vals(&self, q: usize) -> &[T] {
        &self.e_vals[q * self.ne_loc..(q + 1) * self.ne_loc]
    }
}

/// `A = dx/dxi` at reference point `q` from interleaved local kinematic
/// coefficients `[x_0, y_0, x_1, y_1, ...]`.
#[inline]
pub fn map_jacobian<T: Real>(tables: &RefTables<T>, q: usize, local: &[T]) -> Matrix2<T> {
    let mut a = Matrix2::zeros();
    for (n, g) in tables.v_grads(q).iter().enumerate() {
        let x = local[2 * n];
        let y = local[2 * n + 1];
        a[(0, 0)] += x * g[0];
        a[(0, 1)] += x * g[1];
        a[(1, 0)] += y * g[0];
        a[(1, 1)] += y * g[1];
    }
    a
}

/// Inverse of a 2x2 matrix given its determinant.
#[inline]
pub fn inverse2<T: Real>(a: &Matrix2<T>, det: T) -> Matrix2<T> {
    Matrix2::new(
        a[(1, 1)] / det,
        -a[(0, 1)] / det,
        -a[(1, 0)] / det,
        a[(0, 0)] / det,
    )
}

/// Smallest singular value of a 2x2 matrix.
pub fn min_singular_value<T: Real>(a: &Matrix2<T>) -> T {
    let f2 = a.iter().map(|v| *v * *v).sum::<T>();
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let disc = (f2 * f2 - T::lit(4.0) * det * det).max(T::ZERO).sqrt();
    ((f2 - disc) * T::lit(0.5)).max(T::ZERO).sqrt()
}

/// Physical gradient of the velocity field, `(grad v)_{c,b} = d v_c / d x_b`.
#[inline]
pub fn velocity_gradient<T: Real>(
    tables: &RefTables<T>,
    q: usize,
    v_local: &[T],
    a_inv: &Matrix2<T>,
) -> Matrix2<T> {
    map_jacobian(tables, q, v_local) * a_inv
}

/// Gathers interleaved local coefficients of element DOFs.
#[inline]
pub fn gather<T: Real>(global: &[T], dofs: &[usize], out: &mut Vec<T>) {
    out.clear();
    out.extend(dofs.iter().map(|&d| global[d]));
}

/// Deformation data at every point of a rule.
#[derive(Clone, Debug)]
pub struct DeformationEval<T> {
    /// Deformation gradient `grad_{x0} x` per point.
    pub j_mat: Vec<Matrix2<T>>,
    pub det_j: Vec<T>,
    /// Element map Jacobian `dx/dxi` per point.
    pub map_jac: Vec<Matrix2<T>>,
    /// Physical gradients of the scalar kinematic basis, `J x nv_nodes`.
    pub grad_phys: Vec<[T; 2]>,
}

impl<T: Real> DeformationEval<T> {
    /// Sum of `full weight * |J|`, i.e. the current domain volume.
    pub fn volume(&self, rule: &QuadRule<T>) -> T {
        rule.full_weights
            .iter()
            .zip(&self.det_j)
            .map(|(w, d)| *w * *d)
            .sum()
    }
}

/// Evaluates the deformation of `x` relative to `x0` at every rule point.
pub fn eval_deformation<T: Real>(
    space_v: &FemSpace<T>,
    tables: &RefTables<T>,
    rule: &QuadRule<T>,
    x0: &[T],
    x: &[T],
) -> Result<DeformationEval<T>> {
    if x.len() != space_v.n_dofs || x0.len() != space_v.n_dofs {
        return Err(Error::Dimension(format!(
            "position vector length {} (reference {}) != N_v = {}",
            x.len(),
            x0.len(),
            space_v.n_dofs
        )));
    }
    let n_q = rule.n_q();
    let total = rule.len();
    let mut out = DeformationEval {
        j_mat: Vec::with_capacity(total),
        det_j: Vec::with_capacity(total),
        map_jac: Vec::with_capacity(total),
        grad_phys: Vec::with_capacity(total * tables.nv_nodes),
    };
    let mut xl = Vec::new();
    let mut x0l = Vec::new();
    for e in 0..space_v.n_elements() {
        let dofs = space_v.element_dofs(e);
        gather(x, dofs, &mut xl);
        gather(x0, dofs, &mut x0l);
        for q in 0..n_q {
            let a = map_jacobian(tables, q, &xl);
            let a0 = map_jacobian(tables, q, &x0l);
            let det_a = a.determinant();
            let det_a0 = a0.determinant();
            if !(det_a > T::ZERO) {
                return Err(Error::Tangled {
                    elem: e,
                    point: q,
                    det: det_a.to_f64_(),
                });
            }
            let a_inv = inverse2(&a, det_a);
            let a0_inv = inverse2(&a0, det_a0);
            out.j_mat.push(a * a0_inv);
            out.det_j.push(det_a / det_a0);
            out.map_jac.push(a);
            for g in tables.v_grads(q) {
                // grad_x = A^{-T} grad_xi
                out.grad_phys.push([
                    a_inv[(0, 0)] * g[0] + a_inv[(1, 0)] * g[1],
                    a_inv[(0, 1)] * g[0] + a_inv[(1, 1)] * g[1],
                ]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::{build_cartesian_mesh, Domain};
    use crate::fem::quadrature::gauss_rule;
    use crate::fem::space::{build_fem_space, SpaceKind};

    struct Setup {
        v: FemSpace<f64>,
        rule: QuadRule<f64>,
        tables: RefTables<f64>,
    }

    fn setup() -> Setup {
        let mesh = build_cartesian_mesh::<f64>(Domain::unit_square(), 1, 0.5).unwrap();
        let v = build_fem_space(&mesh, SpaceKind::Kinematic, 2).unwrap();
        let e = build_fem_space(&mesh, SpaceKind::Thermodynamic, 2).unwrap();
        let rule = gauss_rule(&mesh, 3);
        let tables = RefTables::new(&v, &e, &rule);
        Setup { v, rule, tables }
    }

    #[test]
    fn identity_motion() {
        let s = setup();
        let x0 = s.v.initial_positions();
        let d = eval_deformation(&s.v, &s.tables, &s.rule, &x0, &x0).unwrap();
        for (j, det) in d.j_mat.iter().zip(&d.det_j) {
            assert!((j - Matrix2::identity()).norm() < 1e-14);
            assert!((det - 1.0).abs() < 1e-14);
        }
        assert!((d.volume(&s.rule) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn uniform_dilation() {
        let s = setup();
        let x0 = s.v.initial_positions();
        let x: Vec<f64> = x0.iter().map(|v| 2.0 * v).collect();
        let d = eval_deformation(&s.v, &s.tables, &s.rule, &x0, &x).unwrap();
        for det in &d.det_j {
            assert!((det - 4.0).abs() < 1e-13);
        }
        assert!((d.volume(&s.rule) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tangled_mesh_is_an_error() {
        let s = setup();
        let x0 = s.v.initial_positions();
        let mut x = x0.clone();
        // Mirror x: orientation flips everywhere.
        for i in (0..x.len()).step_by(2) {
            x[i] = -x[i];
        }
        assert!(matches!(
            eval_deformation(&s.v, &s.tables, &s.rule, &x0, &x),
            Err(Error::Tangled { .. })
        ));
    }

    #[test]
    fn min_singular_value_of_diagonal() {
        let a = Matrix2::<f64>::new(3.0, 0.0, 0.0, 0.5);
        assert!((min_singular_value(&a) - 0.5).abs() < 1e-15);
    }
}
