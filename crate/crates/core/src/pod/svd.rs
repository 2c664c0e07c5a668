//! Proper orthogonal decomposition with the singular-value-sum energy
//! criterion.

use nalgebra::DMatrix;

use crate::linalg::BandedCholesky;
use crate::scalar::Real;

/// Inner product in which the POD modes are orthonormal.
#[derive(Clone, Copy, Debug)]
pub enum PodMetric<'a, T> {
    Euclidean,
    /// Cholesky factor `L` of the mass matrix `M = L L^T`.
    Mass(&'a BandedCholesky<T>),
}

#[derive(Clone, Debug)]
pub struct PodResult<T> {
    /// `N x n` basis, orthonormal in the requested metric.
    pub basis: DMatrix<T>,
    /// All singular values of the (metric-weighted) data, descending.
    pub singular_values: Vec<T>,
}

impl<T: Real> PodResult<T> {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// Smallest `n` with `sum_{i<n} s_i / sum_i s_i >= e_sigma`, counting only
/// numerically nonzero singular values. Sums the singular values
/// themselves, not their squares.
pub fn energy_rank<T: Real>(singular_values: &[T], e_sigma: f64, rows: usize) -> usize {
    let Some(&s0) = singular_values.first() else {
        return 0;
    };
    if !(s0 > T::ZERO) {
        return 0;
    }
    let floor = s0 * T::from_usize_(rows.max(singular_values.len())) * T::EPS;
    let nonzero: Vec<T> = singular_values
        .iter()
        .copied()
        .take_while(|s| *s > floor)
        .collect();
    let total: T = nonzero.iter().copied().sum();
    let target = T::lit(e_sigma);
    let mut acc = T::ZERO;
    for (i, s) in nonzero.iter().enumerate() {
        acc += *s;
        if acc / total >= target {
            return i + 1;
        }
    }
    nonzero.len()
}

/// POD of the columns of `data` keeping the leading modes that reach the
/// energy ratio `e_sigma`. Mass-weighted POD takes the SVD of `L^T X` and
/// maps the left singular vectors back with `L^{-T}`.
pub fn pod_basis<T: Real>(
    data: &DMatrix<T>,
    e_sigma: f64,
    metric: PodMetric<'_, T>,
) -> PodResult<T> {
    assert!(
        e_sigma > 0.0 && e_sigma <= 1.0,
        "energy ratio must lie in (0, 1]"
    );
    let (rows, cols) = data.shape();
    if cols == 0 || data.iter().all(|v| *v == T::ZERO) {
        return PodResult {
            basis: DMatrix::zeros(rows, 0),
            singular_values: vec![T::ZERO; cols.min(rows)],
        };
    }
    let weighted = match metric {
        PodMetric::Euclidean => data.clone(),
        PodMetric::Mass(l) => {
            let mut w = DMatrix::zeros(rows, cols);
            for (j, c) in data.column_iter().enumerate() {
                let col: Vec<T> = c.iter().copied().collect();
                w.column_mut(j).copy_from_slice(&l.mul_lt(&col));
            }
            w
        }
    };
    let svd = weighted.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sv: Vec<T> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let n = energy_rank(&sv, e_sigma, rows);
    let mut basis = DMatrix::zeros(rows, n);
    for (k, &i) in order.iter().take(n).enumerate() {
        let mut col: Vec<T> = u.column(i).iter().copied().collect();
        if let PodMetric::Mass(l) = metric {
            l.solve_lt_in_place(&mut col);
        }
        // Deterministic sign: largest-magnitude entry positive.
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, T::ZERO), |(bi, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
        if col[imax] < T::ZERO {
            col.iter_mut().for_each(|c| *c = -*c);
        }
        basis.column_mut(k).copy_from_slice(&col);
    }
    PodResult {
        basis,
        singular_values: sv,
    }
}
