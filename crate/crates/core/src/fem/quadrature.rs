//! Element-wise tensor-product Gauss–Legendre quadrature.

use super::basis::gauss_legendre;
use super::mesh::Mesh2D;
use crate::scalar::Real;

/// Quadrature rule over the whole mesh; point `j = elem * n_q + q`.
///
/// `full_weights[j]` already contains the reference-to-physical measure of
/// the initial configuration, so `sum_j full_weights[j] * |J|(x_j) f(x_j)`
/// integrates `f` over the current domain.
#[derive(Clone, Debug)]
pub struct QuadRule<T> {
    pub points_per_dim: usize,
    /// Reference points on `[-1,1]^2` and their reference weights.
    pub ref_points: Vec<[T; 2]>,
    pub ref_weights: Vec<T>,
    pub n_elements: usize,
    pub full_weights: Vec<T>,
    pub reduced_weights: Vec<T>,
}

impl<T: Real> QuadRule<T> {
    /// Points per element.
    pub fn n_q(&self) -> usize {
        self.ref_points.len()
    }

    /// Total number of points `J`.
    pub fn len(&self) -> usize {
        self.full_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.full_weights.is_empty()
    }

    pub fn element_of(&self, j: usize) -> usize {
        j / self.n_q()
    }

    pub fn local_of(&self, j: usize) -> usize {
        j % self.n_q()
    }

    /// Number of nonzero reduced weights `Ĵ`.
    pub fn nnz(&self) -> usize {
        self.reduced_weights
            .iter()
            .filter(|w| **w != T::ZERO)
            .count()
    }

    /// Copy of this rule carrying the given reduced weights.
    pub fn with_reduced(&self, reduced: Vec<T>) -> Self {
        assert_eq!(reduced.len(), self.len());
        QuadRule {
            reduced_weights: reduced,
            ..self.clone()
        }
    }

    /// Indices and weights of nonzero reduced weights, ascending.
    pub fn sparse_reduced(&self) -> Vec<(usize, T)> {
        self.reduced_weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != T::ZERO)
            .map(|(j, w)| (j, *w))
            .collect()
    }
}

/// Tensor-product Gauss–Legendre rule with `points_per_dim^2` points per
/// element; exact for degree `2 * points_per_dim - 1` per direction.
pub fn gauss_rule<T: Real>(mesh: &Mesh2D<T>, points_per_dim: usize) -> QuadRule<T> {
    assert!(points_per_dim >= 1);
    let (x, w) = gauss_legendre::<T>(points_per_dim);
    let mut ref_points = Vec::with_capacity(points_per_dim * points_per_dim);
    let mut ref_weights = Vec::with_capacity(points_per_dim * points_per_dim);
    for iy in 0..points_per_dim {
        for ix in 0..points_per_dim {
            ref_points.push([x[ix], x[iy]]);
            ref_weights.push(w[ix] * w[iy]);
        }
    }
    // Uniform Cartesian cells: the initial element map is an isotropic scaling.
    let half = mesh.h * T::lit(0.5);
    let det0 = half * half;
    let n_el = mesh.n_elements();
    let mut full_weights = Vec::with_capacity(n_el * ref_weights.len());
    for _ in 0..n_el {
        full_weights.extend(ref_weights.iter().map(|&w| w * det0));
    }
    let len = full_weights.len();
    QuadRule {
        points_per_dim,
        ref_points,
        ref_weights,
        n_elements: n_el,
        full_weights,
        reduced_weights: vec![T::ZERO; len],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::{build_cartesian_mesh, Domain};

    #[test]
    fn one_point_rule_on_reference_square() {
        let m = build_cartesian_mesh::<f64>(Domain::new([-1.0, -1.0], [1.0, 1.0]), 0, 2.0).unwrap();
        let r = gauss_rule(&m, 1);
        assert_eq!(r.len(), 1);
        assert_eq!(r.ref_points[0], [0.0, 0.0]);
        assert!((r.ref_weights[0] - 4.0).abs() < 1e-15);
        assert!((r.full_weights[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_area_and_count() {
        let m = build_cartesian_mesh::<f64>(Domain::new([0.0, 0.0], [7.0, 3.0]), 2, 1.0).unwrap();
        let r = gauss_rule(&m, 3);
        assert_eq!(r.len(), m.n_elements() * 9);
        let s: f64 = r.full_weights.iter().sum();
        assert!((s - 21.0).abs() < 1e-12 * 21.0);
        assert_eq!(r.nnz(), 0);
    }
}
