//! Symmetric banded matrices and their Cholesky factors, plus small dense
//! helpers.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetric matrix stored as its lower band: `data[i * (bw + 1) + d] = A[i][i - d]`.
#[derive(Clone, Debug)]
pub struct BandedSym<T> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Real> BandedSym<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            data: vec![T::ZERO; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        (d <= self.bw).then(|| i * (self.bw + 1) + d)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.idx(i, j).map_or(T::ZERO, |k| self.data[k])
    }

    /// Adds `v` to the `(i, j)` entry (and implicitly `(j, i)`). Panics
    /// outside the band. Call once per unordered pair.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::ZERO; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..];
            y[i] += row[0] * x[i];
            for j in lo..i {
                let a = row[i - j];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
        }
        y
    }

    /// `x^T A y`.
    pub fn inner(&self, x: &[T], y: &[T]) -> T {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| *a * *b).sum()
    }

    /// Copy with rows/columns of `dofs` replaced by the identity.
    pub fn constrained(&self, dofs: &[usize]) -> Self {
        let mut c = self.clone();
        let mut mask = vec![false; self.n];
        for &d in dofs {
            mask[d] = true;
        }
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                if mask[i] || mask[j] {
                    let k = i * (self.bw + 1) + (i - j);
                    c.data[k] = if i == j { T::ONE } else { T::ZERO };
                }
            }
        }
        c
    }

    /// Row sums `A 1`.
    pub fn row_sums(&self) -> Vec<T> {
        self.mul_vec(&vec![T::ONE; self.n])
    }

    pub fn cholesky(&self) -> Result<BandedCholesky<T>> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            // Diagonal.
            let lo = j.saturating_sub(bw);
            let mut s = l[j * w];
            for k in lo..j {
                let v = l[j * w + (j - k)];
                s -= v * v;
            }
            if !(s > T::ZERO) {
                return Err(Error::NotPositiveDefinite {
                    index: j,
                    value: s.to_f64_(),
                });
            }
            let djj = s.sqrt();
            l[j * w] = djj;
            for i in j + 1..(j + w).min(n) {
                let lo_i = i.saturating_sub(bw);
                let mut s = l[i * w + (i - j)];
                for k in lo_i.max(lo)..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / djj;
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }
}

/// Lower-triangular banded factor `L` with `A = L L^T`.
#[derive(Clone, Debug)]
pub struct BandedCholesky<T> {
    n: usize,
    bw: usize,
    l: Vec<T>,
}

impl<T: Real> BandedCholesky<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.l[i * (self.bw + 1) + (i - j)]
    }

    /// Solves `L y = b` in place.
    pub fn solve_l_in_place(&self, b: &mut [T]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.at(i, k) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn solve_lt_in_place(&self, y: &mut [T]) {
        for i in (0..self.n).rev() {
            y[i] /= self.at(i, i);
            let yi = y[i];
            let lo = i.saturating_sub(self.bw);
            for k in lo..i {
                y[k] -= self.at(i, k) * yi;
            }
        }
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        self.solve_l_in_place(b);
        self.solve_lt_in_place(b);
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `L^T x`.
    pub fn mul_lt(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::ZERO; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for k in lo..=i {
                y[k] += self.at(i, k) * x[i];
            }
        }
        y
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// `||a - b|| / ||b||`, with `||b|| = 0` giving the absolute norm.
pub fn rel_diff<T: Real>(a: &[T], b: &[T]) -> T {
    let num = a
        .iter()
        .zip(b)
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum::<T>()
        .sqrt();
    let den = norm2(b);
    if den > T::ZERO {
        num / den
    } else {
        num
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, bw: usize, seed: u64) -> (BandedSym<f64>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = BandedSym::zeros(n, bw);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let v: f64 = if i == j {
                    10.0 + rng.gen::<f64>()
                } else {
                    rng.gen_range(-1.0..1.0)
                };
                b.add(i, j, v);
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        (b, d)
    }

    #[test]
    fn matvec_matches_dense() {
        let (b, d) = random_banded(30, 4, 1);
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let y = b.mul_vec(&x);
        let yd = &d * DMatrix::from_column_slice(30, 1, &x);
        for i in 0..30 {
            assert!((y[i] - yd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_solves_and_factors() {
        let (b, d) = random_banded(40, 5, 2);
        let c = b.cholesky().unwrap();
        let rhs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1 - 1.0).collect();
        let x = c.solve(&rhs);
        let r = b.mul_vec(&x);
        assert!(rel_diff(&r, &rhs) < 1e-13);
        // x^T A x = |L^T x|^2
        let lt = c.mul_lt(&x);
        let q = b.inner(&x, &x);
        assert!((dot(&lt, &lt) - q).abs() < 1e-12 * q);
        let _ = d;
    }

    #[test]
    fn lt_solve_inverts_lt_mul() {
        let (b, _) = random_banded(25, 3, 3);
        let c = b.cholesky().unwrap();
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut y = c.mul_lt(&x);
        c.solve_lt_in_place(&mut y);
        assert!(rel_diff(&y, &x) < 1e-13);
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut b = BandedSym::<f64>::zeros(2, 1);
        b.add(0, 0, 1.0);
        b.add(1, 0, 2.0);
        b.add(1, 1, 1.0);
        assert!(matches!(
            b.cholesky(),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn constrained_copy_decouples_dofs() {
        let (b, _) = random_banded(10, 2, 4);
        let c = b.constrained(&[0, 5]);
        assert_eq!(c.get(5, 5), 1.0);
        assert_eq!(c.get(5, 4), 0.0);
        assert_eq!(c.get(6, 5), 0.0);
        assert_eq!(c.get(3, 2), b.get(3, 2));
    }
}
