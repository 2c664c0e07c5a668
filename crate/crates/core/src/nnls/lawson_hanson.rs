//! Lawson–Hanson active-set NNLS with per-constraint threshold termination.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::system::ConstraintSystem;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Why the iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Thresholds,
    Optimal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnlsOptions {
    /// Outer iterations; `None` means `10 * N_c`.
    pub max_iter: Option<usize>,
    /// Stop as soon as every row meets its threshold. When false the
    /// iteration runs to least-squares optimality.
    pub stop_at_thresholds: bool,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        NnlsOptions {
            max_iter: None,
            stop_at_thresholds: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NnlsSolution<T> {
    pub weights: Vec<T>,
    pub nnz: usize,
    pub iterations: usize,
    pub residuals: Vec<T>,
    pub termination: Termination,
}

/// QR factorization of a growing/shrinking set of columns.
struct IncrementalQr<T> {
    m: usize,
    q: Vec<Vec<T>>,
    /// Column `k` of `R` holds rows `0..=k`.
    r: Vec<Vec<T>>,
}

impl<T: Real> IncrementalQr<T> {
    fn new(m: usize) -> Self {
        IncrementalQr {
            m,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    /// Appends a column; returns false (leaving the factorization intact)
    /// when it is numerically dependent on the current ones.
    fn push(&mut self, col: &[T]) -> bool {
        if self.len() >= self.m {
            return false;
        }
        let orig = crate::linalg::norm2(col);
        if !(orig > T::ZERO) {
            return false;
        }
        let mut u = col.to_vec();
        let mut rcol = vec![T::ZERO; self.len() + 1];
        for _ in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let h = crate::linalg::dot(qk, &u);
                rcol[k] += h;
                crate::linalg::axpy(-h, qk, &mut u);
            }
        }
        let norm = crate::linalg::norm2(&u);
        if !(norm > T::lit(1e3) * T::EPS * orig) {
            return false;
        }
        let inv = T::ONE / norm;
        u.iter_mut().for_each(|v| *v *= inv);
        rcol[self.len()] = norm;
        self.q.push(u);
        self.r.push(rcol);
        true
    }

    /// Removes column `k`, restoring triangular form with Givens rotations.
    fn remove(&mut self, k: usize) {
        self.r.remove(k);
        let p = self.r.len();
        for i in k..p {
            let (a, b) = (self.r[i][i], self.r[i][i + 1]);
            let h = (a * a + b * b).sqrt();
            let (c, s) = if h > T::ZERO {
                (a / h, b / h)
            } else {
                (T::ONE, T::ZERO)
            };
            self.r[i][i] = h;
            self.r[i].pop();
            for j in i + 1..p {
                let (ai, ai1) = (self.r[j][i], self.r[j][i + 1]);
                self.r[j][i] = c * ai + s * ai1;
                self.r[j][i + 1] = c * ai1 - s * ai;
            }
            let (lo, hi) = self.q.split_at_mut(i + 1);
            for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
                let (xi, yi) = (*x, *y);
                *x = c * xi + s * yi;
                *y = c * yi - s * xi;
            }
        }
        self.q.pop();
    }

    /// Least-squares coefficients `R^{-1} Q^T b`.
    fn solve(&self, b: &[T]) -> Vec<T> {
        let p = self.len();
        let mut z: Vec<T> = self.q.iter().map(|q| crate::linalg::dot(q, b)).collect();
        for i in (0..p).rev() {
            let mut acc = z[i];
            for j in i + 1..p {
                acc -= self.r[j][i] * z[j];
            }
            z[i] = acc / self.r[i][i];
        }
        z
    }
}

fn within_thresholds<T: Real>(resid: &[T], eps: &[T]) -> bool {
    resid.iter().zip(eps).all(|(r, e)| r.abs() <= *e)
}

/// Active-set NNLS on `sys`. Candidate ties go to the lowest column index.
pub fn lawson_hanson<T: Real>(
    sys: &ConstraintSystem<T>,
    opts: &NnlsOptions,
) -> Result<NnlsSolution<T>> {
    lawson_hanson_until(sys, opts, |_| false)
}

/// As [`lawson_hanson`], additionally stopping (when thresholds stop the
/// iteration at all) as soon as `accept(residual)` holds. Used to stop a
/// transformed problem once the original constraints are met.
pub fn lawson_hanson_until<T: Real>(
    sys: &ConstraintSystem<T>,
    opts: &NnlsOptions,
    accept: impl Fn(&[T]) -> bool,
) -> Result<NnlsSolution<T>> {
    let (m, n) = (sys.n_constraints(), sys.n_points());
    let max_iter = opts.max_iter.unwrap_or(10 * m.max(1));
    let data = sys.c.as_slice();
    let col = |j: usize| &data[j * m..(j + 1) * m];
    let col_max = (0..n)
        .map(|j| crate::linalg::norm2(col(j)))
        .fold(T::ZERO, |a, b| a.max(b));
    let tol_scale = T::lit(10.0) * T::EPS * col_max * T::from_usize_(m.max(n));

    let mut x = vec![T::ZERO; n];
    let mut passive: Vec<usize> = Vec::new();
    let mut in_passive = vec![false; n];
    let mut excluded = vec![false; n];
    let mut qr = IncrementalQr::new(m);
    let mut resid = sys.b.clone();
    let mut iterations = 0;

    let termination = loop {
        if opts.stop_at_thresholds && (within_thresholds(&resid, &sys.eps) || accept(&resid)) {
            break Termination::Thresholds;
        }
        let w = sys.c.tr_mul(&DVector::from_column_slice(&resid));
        let tol = tol_scale * crate::linalg::norm2(&resid);
        let mut best: Option<(usize, T)> = None;
        for j in 0..n {
            if in_passive[j] || excluded[j] {
                continue;
            }
            if best.is_none_or(|(_, bw)| w[j] > bw) {
                best = Some((j, w[j]));
            }
        }
        let Some((t, _)) = best.filter(|(_, wt)| *wt > tol) else {
            break Termination::Optimal;
        };
        if iterations >= max_iter {
            let (worst_row, worst_ratio) = sys.worst_ratio(&x);
            return Err(Error::InfeasibleTolerance {
                iterations,
                worst_row,
                worst_ratio: worst_ratio.to_f64_(),
                residuals: resid.iter().map(|r| r.abs().to_f64_()).collect(),
            });
        }
        iterations += 1;
        if !qr.push(col(t)) {
            excluded[t] = true;
            continue;
        }
        passive.push(t);
        in_passive[t] = true;
        let mut z = qr.solve(&sys.b);
        if !(z[z.len() - 1] > T::ZERO) {
            qr.remove(passive.len() - 1);
            passive.pop();
            in_passive[t] = false;
            excluded[t] = true;
            continue;
        }
        excluded.iter_mut().for_each(|e| *e = false);

        while z.iter().any(|v| !(*v > T::ZERO)) {
            let mut alpha = T::ONE;
            let mut hit = 0;
            for (k, &j) in passive.iter().enumerate() {
                if !(z[k] > T::ZERO) {
                    let a = x[j] / (x[j] - z[k]);
                    if a < alpha {
                        alpha = a;
                        hit = k;
                    }
                }
            }
            for (k, &j) in passive.iter().enumerate() {
                let xj = x[j];
                x[j] = xj + alpha * (z[k] - xj);
            }
            x[passive[hit]] = T::ZERO;
            let mut k = passive.len();
            while k > 0 {
                k -= 1;
                let j = passive[k];
                if !(x[j] > T::ZERO) {
                    x[j] = T::ZERO;
                    in_passive[j] = false;
                    passive.remove(k);
                    qr.remove(k);
                }
            }
            z = qr.solve(&sys.b);
        }
        for (k, &j) in passive.iter().enumerate() {
            x[j] = z[k];
        }
        resid.copy_from_slice(&sys.b);
        for &j in &passive {
            crate::linalg::axpy(-x[j], col(j), &mut resid);
        }
    };

    let residuals: Vec<T> = resid.iter().map(|r| r.abs()).collect();
    Ok(NnlsSolution {
        nnz: passive.len(),
        weights: x,
        iterations,
        residuals,
        termination,
    })
}
