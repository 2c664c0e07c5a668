//! Nodal finite element spaces on a [`Mesh2D`].
//!
//! The kinematic space is continuous `Q_k`, vector valued with two
//! components per node (DOF `2 * node + component`). The thermodynamic space
//! is discontinuous scalar `Q_{k-1}` with element-local DOFs
//! (`elem * n_local + local`).

use serde::{Deserialize, Serialize};

use super::basis::{gauss_lobatto, Lagrange1D, TensorBasis};
use super::mesh::{Mesh2D, WallTag};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DIM: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Kinematic,
    Thermodynamic,
}

#[derive(Clone, Debug)]
pub struct FemSpace<T> {
    pub kind: SpaceKind,
    pub poly_order: usize,
    pub basis: TensorBasis<T>,
    pub n_dofs: usize,
    n_elements: usize,
    n_local: usize,
    /// Row-major `n_elements x n_local` local-to-global DOF map.
    elem_dofs: Vec<usize>,
    /// Kinematic only: initial nodal coordinates and wall tags.
    pub node_coords0: Vec<[T; 2]>,
    pub node_tags: Vec<WallTag>,
}

impl<T: Real> FemSpace<T> {
    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    /// Local DOF count per element (components included).
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.elem_dofs[e * self.n_local..(e + 1) * self.n_local]
    }

    pub fn components(&self) -> usize {
        match self.kind {
            SpaceKind::Kinematic => DIM,
            SpaceKind::Thermodynamic => 1,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_dofs / self.components()
    }

    /// True when DOF `dof` is a wall-normal velocity component.
    pub fn is_constrained(&self, dof: usize) -> bool {
        match self.kind {
            SpaceKind::Kinematic => self.node_tags[dof / DIM].constrains(dof % DIM),
            SpaceKind::Thermodynamic => false,
        }
    }

    pub fn constrained_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs)
            .filter(|&d| self.is_constrained(d))
            .collect()
    }

    /// Coefficient vector of the initial positions `x0` (kinematic only).
    pub fn initial_positions(&self) -> Vec<T> {
        let mut x = Vec::with_capacity(self.n_dofs);
        for p in &self.node_coords0 {
            x.push(p[0]);
            x.push(p[1]);
        }
        x
    }

    /// Nodal interpolation of a vector field (kinematic only).
    pub fn interpolate_vector(&self, f: impl Fn([T; 2]) -> [T; 2]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_dofs);
        for p in &self.node_coords0 {
            let v = f(*p);
            out.push(v[0]);
            out.push(v[1]);
        }
        out
    }

    /// Physical coordinates of thermodynamic local node `b` of element `e`
    /// in the initial configuration.
    pub fn local_node_position(&self, mesh: &Mesh2D<T>, e: usize, b: usize) -> [T; 2] {
        let o = mesh.element_origin(e);
        let xi = self.basis.node(b);
        let half = mesh.h * T::lit(0.5);
        [
            o[0] + (xi[0] + T::ONE) * half,
            o[1] + (xi[1] + T::ONE) * half,
        ]
    }

    /// Coefficient vector of the unity function; the nodal bases reproduce
    /// constants with all-ones coefficients.
    pub fn unity(&self) -> Vec<T> {
        vec![T::ONE; self.n_dofs]
    }
}

fn line_basis<T: Real>(order: usize) -> Lagrange1D<T> {
    if order == 0 {
        Lagrange1D::new(vec![T::ZERO])
    } else {
        Lagrange1D::new(gauss_lobatto(order + 1))
    }
}

/// Builds the kinematic (`Q_k`, H1) or thermodynamic (`Q_{k-1}`, L2) space
/// for kinematic order `k`.
pub fn build_fem_space<T: Real>(
    mesh: &Mesh2D<T>,
    kind: SpaceKind,
    k: usize,
) -> Result<FemSpace<T>> {
    if k == 0 {
        return Err(Error::Config("kinematic order k must be at least 1".into()));
    }
    let n_el = mesh.n_elements();
    match kind {
        SpaceKind::Kinematic => {
            let basis = TensorBasis::new(line_basis::<T>(k));
            let n1 = k + 1;
            let [nx, ny] = mesh.cells;
            let gx = k * nx + 1;
            let gy = k * ny + 1;
            let n_nodes = gx * gy;
            let mut node_coords0 = vec![[T::ZERO; 2]; n_nodes];
            let mut node_tags = vec![WallTag::default(); n_nodes];
            let n_local_nodes = n1 * n1;
            let mut elem_dofs = Vec::with_capacity(n_el * n_local_nodes * DIM);
            let half = mesh.h * T::lit(0.5);
            for e in 0..n_el {
                let [ex, ey] = mesh.element_cell(e);
                let o = mesh.element_origin(e);
                for a in 0..n_local_nodes {
                    let (ax, ay) = (a % n1, a / n1);
                    let ix = k * ex + ax;
                    let iy = k * ey + ay;
                    let node = ix + gx * iy;
                    let xi = basis.node(a);
                    node_coords0[node] = [
                        o[0] + (xi[0] + T::ONE) * half,
                        o[1] + (xi[1] + T::ONE) * half,
                    ];
                    node_tags[node] = WallTag {
                        x: ix == 0 || ix == gx - 1,
                        y: iy == 0 || iy == gy - 1,
                    };
                    for c in 0..DIM {
                        elem_dofs.push(DIM * node + c);
                    }
                }
            }
            Ok(FemSpace {
                kind,
                poly_order: k,
                basis,
                n_dofs: n_nodes * DIM,
                n_elements: n_el,
                n_local: n_local_nodes * DIM,
                elem_dofs,
                node_coords0,
                node_tags,
            })
        }
        SpaceKind::Thermodynamic => {
            let order = k - 1;
            let basis = TensorBasis::new(line_basis::<T>(order));
            let n_local = basis.len();
            let elem_dofs = (0..n_el * n_local).collect();
            Ok(FemSpace {
                kind,
                poly_order: order,
                basis,
                n_dofs: n_el * n_local,
                n_elements: n_el,
                n_local,
                elem_dofs,
                node_coords0: Vec::new(),
                node_tags: Vec::new(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::{build_cartesian_mesh, Domain};

    fn mesh(m: u32, h0: f64) -> Mesh2D<f64> {
        build_cartesian_mesh(Domain::unit_square(), m, h0).unwrap()
    }

    #[test]
    fn single_element_counts() {
        let m = mesh(0, 1.0);
        let v = build_fem_space(&m, SpaceKind::Kinematic, 1).unwrap();
        assert_eq!(v.n_dofs, 8);
        let e = build_fem_space(&m, SpaceKind::Thermodynamic, 2).unwrap();
        assert_eq!(e.n_dofs, 4);
        assert_eq!(e.poly_order, 1);
    }

    #[test]
    fn shared_face_counting() {
        let m = mesh(0, 0.5);
        let v = build_fem_space(&m, SpaceKind::Kinematic, 2).unwrap();
        assert_eq!(v.n_dofs, 50);
    }

    #[test]
    fn zero_order_is_invalid() {
        let m = mesh(0, 1.0);
        assert!(build_fem_space(&m, SpaceKind::Kinematic, 0).is_err());
    }

    #[test]
    fn dof_maps_partition() {
        let m = mesh(1, 0.5);
        let e = build_fem_space(&m, SpaceKind::Thermodynamic, 2).unwrap();
        let mut owner = vec![usize::MAX; e.n_dofs];
        for el in 0..e.n_elements() {
            for &d in e.element_dofs(el) {
                assert_eq!(owner[d], usize::MAX);
                owner[d] = el;
            }
        }
        assert!(owner.iter().all(|&o| o != usize::MAX));

        // Kinematic DOF multiplicity: interior-vertex 4, edge 2, element interior 1.
        let v = build_fem_space(&m, SpaceKind::Kinematic, 2).unwrap();
        let mut count = vec![0usize; v.n_dofs];
        for el in 0..v.n_elements() {
            for &d in v.element_dofs(el) {
                count[d] += 1;
            }
        }
        for (node, p) in v.node_coords0.iter().enumerate() {
            let on_vx = ((p[0] / 0.25).round() * 0.25 - p[0]).abs() < 1e-12;
            let on_vy = ((p[1] / 0.25).round() * 0.25 - p[1]).abs() < 1e-12;
            let ix = if on_vx && p[0] > 1e-12 && p[0] < 1.0 - 1e-12 {
                2
            } else {
                1
            };
            let iy = if on_vy && p[1] > 1e-12 && p[1] < 1.0 - 1e-12 {
                2
            } else {
                1
            };
            assert_eq!(count[2 * node], ix * iy, "node {node} at {p:?}");
        }
    }

    #[test]
    fn node_positions_consistent_across_elements() {
        let m = mesh(1, 0.5);
        let v = build_fem_space(&m, SpaceKind::Kinematic, 3).unwrap();
        for el in 0..v.n_elements() {
            let o = m.element_origin(el);
            for a in 0..v.basis.len() {
                let xi = v.basis.node(a);
                let node = v.element_dofs(el)[2 * a] / 2;
                let p = v.node_coords0[node];
                assert!((p[0] - (o[0] + (xi[0] + 1.0) * 0.125)).abs() < 1e-14);
                assert!((p[1] - (o[1] + (xi[1] + 1.0) * 0.125)).abs() < 1e-14);
            }
        }
    }
}
