//! Modified Gram–Schmidt with double orthogonalization in a Euclidean or
//! SPD-matrix inner product.

use nalgebra::DMatrix;

use crate::linalg::BandedSym;
use crate::scalar::Real;

/// Relative norm below which an orthogonalized column is considered
/// dependent and dropped.
pub const DROP_TOL: f64 = 1e-10;

/// Inner product used to orthonormalize basis columns.
#[derive(Clone, Copy, Debug)]
pub enum Metric<'a, T> {
    Euclidean,
    Mass(&'a BandedSym<T>),
}

impl<'a, T: Real> Metric<'a, T> {
    /// `M x` (identity for the Euclidean metric).
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        match self {
            Metric::Euclidean => x.to_vec(),
            Metric::Mass(m) => m.mul_vec(x),
        }
    }

    pub fn inner(&self, x: &[T], y: &[T]) -> T {
        match self {
            Metric::Euclidean => crate::linalg::dot(x, y),
            Metric::Mass(m) => m.inner(x, y),
        }
    }

    pub fn norm(&self, x: &[T]) -> T {
        self.inner(x, x).max(T::ZERO).sqrt()
    }
}

/// Orthogonalizes `col` against `basis` (two passes) and appends it when
/// its remaining norm exceeds `DROP_TOL` of its original norm. Returns
/// whether a column was added.
pub fn mgs2_append<T: Real>(
    basis: &mut Vec<Vec<T>>,
    mut col: Vec<T>,
    metric: Metric<'_, T>,
) -> bool {
    let orig = metric.norm(&col);
    if !(orig > T::ZERO) {
        return false;
    }
    for _ in 0..2 {
        for q in basis.iter() {
            let r = metric.inner(q, &col);
            crate::linalg::axpy(-r, q, &mut col);
        }
    }
    let norm = metric.norm(&col);
    if !(norm > T::lit(DROP_TOL) * orig) {
        return false;
    }
    let inv = T::ONE / norm;
    col.iter_mut().for_each(|c| *c *= inv);
    basis.push(col);
    true
}

/// Orthonormalizes `columns` in order, dropping near-dependent ones.
pub fn mgs2_orthonormalize<T: Real>(columns: &[Vec<T>], metric: Metric<'_, T>) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(columns.len());
    for c in columns {
        mgs2_append(&mut out, c.clone(), metric);
    }
    out
}

/// Columns of a dense matrix as vectors.
pub fn columns_of<T: Real>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    m.column_iter()
        .map(|c| c.iter().copied().collect())
        .collect()
}

/// Dense `n x columns.len()` matrix from columns of length `n`.
pub fn matrix_from_columns<T: Real>(n: usize, columns: &[Vec<T>]) -> DMatrix<T> {
    let mut m = DMatrix::zeros(n, columns.len());
    for (j, c) in columns.iter().enumerate() {
        m.column_mut(j).copy_from_slice(c);
    }
    m
}
