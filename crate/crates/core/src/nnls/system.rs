//! Constraint systems, row rescaling and LQ preconditioning.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2};
use crate::scalar::Real;

/// Condition estimate of `L` above which preconditioning is abandoned.
pub const MAX_LQ_CONDITION: f64 = 1e14;

/// `|C r - b| <= eps` row by row, with `r >= 0`.
#[derive(Clone, Debug)]
pub struct ConstraintSystem<T> {
    /// `N_c x J`.
    pub c: DMatrix<T>,
    pub b: Vec<T>,
    pub eps: Vec<T>,
}

impl<T: Real> ConstraintSystem<T> {
    pub fn new(c: DMatrix<T>, b: Vec<T>, eps: Vec<T>) -> Result<Self> {
        if c.nrows() != b.len() || b.len() != eps.len() {
            return Err(Error::Dimension(format!(
                "constraint matrix has {} rows, b {} and eps {} entries",
                c.nrows(),
                b.len(),
                eps.len()
            )));
        }
        if let Some(s) = eps.iter().position(|e| !(*e > T::ZERO)) {
            return Err(Error::Config(format!("threshold {s} is not positive")));
        }
        Ok(ConstraintSystem { c, b, eps })
    }

    pub fn n_constraints(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.c.ncols()
    }

    /// `|c^s . r - b_s|` for every row.
    pub fn residuals(&self, r: &[T]) -> Vec<T> {
        let cr = &self.c * DVector::from_column_slice(r);
        cr.iter()
            .zip(&self.b)
            .map(|(a, b)| (*a - *b).abs())
            .collect()
    }

    /// `max_s |c^s . r - b_s| / eps_s`; at most one means feasible.
    pub fn worst_ratio(&self, r: &[T]) -> (usize, T) {
        self.residuals(r)
            .iter()
            .zip(&self.eps)
            .map(|(res, e)| *res / *e)
            .enumerate()
            .fold(
                (0, T::ZERO),
                |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) },
            )
    }

    pub fn is_feasible(&self, r: &[T]) -> bool {
        self.worst_ratio(r).1 <= T::ONE
    }
}

/// Divides each row (with its `b` and `eps` entries) by its largest
/// absolute entry and drops all-zero rows. Returns the rescaled system and
/// the indices of the kept rows.
pub fn rescale_rows<T: Real>(sys: &ConstraintSystem<T>) -> (ConstraintSystem<T>, Vec<usize>) {
    let kept: Vec<usize> = (0..sys.n_constraints())
        .filter(|&s| sys.c.row(s).iter().any(|v| *v != T::ZERO))
        .collect();
    let mut c = DMatrix::zeros(kept.len(), sys.n_points());
    let mut b = Vec::with_capacity(kept.len());
    let mut eps = Vec::with_capacity(kept.len());
    for (i, &s) in kept.iter().enumerate() {
        let row = sys.c.row(s);
        let scale = row.iter().fold(T::ZERO, |m, v| m.max(v.abs()));
        let inv = T::ONE / scale;
        for (j, v) in row.iter().enumerate() {
            c[(i, j)] = *v * inv;
        }
        b.push(sys.b[s] * inv);
        eps.push(sys.eps[s] * inv);
    }
    (ConstraintSystem { c, b, eps }, kept)
}

/// LQ-transformed system `Q r ~ b_t` with thresholds `eps_t`. Row `k` of
/// `l` belongs to original constraint `perm[k]`; `l` is `N_c x rank`.
#[derive(Clone, Debug)]
pub struct LqSystem<T> {
    pub l: DMatrix<T>,
    pub perm: Vec<usize>,
    pub system: ConstraintSystem<T>,
    pub condition: T,
}

/// Transformed thresholds `min_{j >= s, L_js != 0} eps_j / ((j + 1) |L_js|)`
/// for a lower triangular or trapezoidal `L`.
pub fn transformed_thresholds<T: Real>(l: &DMatrix<T>, eps: &[T]) -> Vec<T> {
    let n = eps.len();
    (0..l.ncols().min(n))
        .map(|s| {
            (s..n)
                .filter(|&j| l[(j, s)] != T::ZERO)
                .map(|j| eps[j] / (T::from_usize_(j + 1) * l[(j, s)].abs()))
                .fold(T::max_value().unwrap_or(T::lit(f64::MAX)), |a, b| a.min(b))
        })
        .collect()
}

/// Reduced LQ factorization `C = L Q` (computed as the QR factorization of
/// `C^T`) and the transformed problem. `b_t = Q rho_full` when the full
/// weights are given, otherwise `L^{-1} b`.
pub fn lq_precondition<T: Real>(
    sys: &ConstraintSystem<T>,
    rho_full: Option<&[T]>,
) -> Result<LqSystem<T>> {
    let (nc, j) = (sys.n_constraints(), sys.n_points());
    if nc == 0 {
        return Ok(LqSystem {
            l: DMatrix::zeros(0, 0),
            perm: vec![],
            system: ConstraintSystem {
                c: DMatrix::zeros(0, j),
                b: vec![],
                eps: vec![],
            },
            condition: T::ONE,
        });
    }
    if nc > j {
        return Err(Error::PreconditionFailure {
            cond: f64::INFINITY,
        });
    }
    let qr = sys.c.transpose().qr();
    let l = qr.r().transpose();
    let sv = l.singular_values();
    let smax = sv.iter().fold(T::ZERO, |m, v| m.max(*v));
    let smin = sv.iter().fold(smax, |m, v| m.min(*v));
    let condition = if smin > T::ZERO {
        smax / smin
    } else {
        T::max_value().unwrap_or(T::lit(f64::MAX))
    };
    if !(condition <= T::lit(MAX_LQ_CONDITION)) {
        return Err(Error::PreconditionFailure {
            cond: condition.to_f64_(),
        });
    }
    let q = qr.q().transpose();
    let b_t: Vec<T> = match rho_full {
        Some(rho) => (&q * DVector::from_column_slice(rho)).as_slice().to_vec(),
        None => {
            let mut y = DVector::from_column_slice(&sys.b);
            if !l.solve_lower_triangular_mut(&mut y) {
                return Err(Error::PreconditionFailure {
                    cond: f64::INFINITY,
                });
            }
            y.as_slice().to_vec()
        }
    };
    let eps_t = transformed_thresholds(&l, &sys.eps);
    Ok(LqSystem {
        l,
        perm: (0..nc).collect(),
        system: ConstraintSystem {
            c: q,
            b: b_t,
            eps: eps_t,
        },
        condition,
    })
}

fn condition_of<T: Real>(l: &DMatrix<T>) -> T {
    let sv = l.singular_values();
    let smax = sv.iter().fold(T::ZERO, |m, v| m.max(*v));
    let smin = sv.iter().fold(smax, |m, v| m.min(*v));
    if smin > T::ZERO {
        smax / smin
    } else {
        T::max_value().unwrap_or(T::lit(f64::MAX))
    }
}

/// Rank-revealing variant for rank-deficient `C`: rows are orthogonalized
/// greedily by largest remaining norm until that norm drops below
/// `rank_tol` times the largest row norm. The dependent rows follow the
/// independent ones in `perm` with full rows in `L`, so `L` is lower
/// trapezoidal and the threshold transformation still bounds every
/// original row up to the truncated remainder. `rho_full` is required.
pub fn lq_precondition_pivoted<T: Real>(
    sys: &ConstraintSystem<T>,
    rho_full: &[T],
    rank_tol: T,
) -> Result<LqSystem<T>> {
    let (nc, j) = (sys.n_constraints(), sys.n_points());
    if rho_full.len() != j {
        return Err(Error::Dimension(format!(
            "{} full weights for {j} points",
            rho_full.len()
        )));
    }
    let rows: Vec<Vec<T>> = (0..nc)
        .map(|s| sys.c.row(s).iter().copied().collect())
        .collect();
    let mut res = rows.clone();
    let mut norms: Vec<T> = res.iter().map(|r| norm2(r)).collect();
    let top = norms.iter().fold(T::ZERO, |m, v| m.max(*v));
    let mut picked = vec![false; nc];
    let mut order = Vec::new();
    let mut qs: Vec<Vec<T>> = Vec::new();
    while qs.len() < nc.min(j) {
        let mut best: Option<usize> = None;
        for i in (0..nc).filter(|&i| !picked[i]) {
            if best.is_none_or(|b| norms[i] > norms[b]) {
                best = Some(i);
            }
        }
        let Some(p) = best.filter(|&p| norms[p] > rank_tol * top) else {
            break;
        };
        let mut u = res[p].clone();
        for q in &qs {
            let h = dot(q, &u);
            axpy(-h, q, &mut u);
        }
        let nu = norm2(&u);
        if !(nu > rank_tol * top) {
            picked[p] = true;
            norms[p] = T::ZERO;
            continue;
        }
        u.iter_mut().for_each(|v| *v /= nu);
        picked[p] = true;
        order.push(p);
        for i in (0..nc).filter(|&i| !picked[i]) {
            let h = dot(&u, &res[i]);
            axpy(-h, &u, &mut res[i]);
            norms[i] = norm2(&res[i]);
        }
        qs.push(u);
    }
    let rank = qs.len();
    if rank == 0 {
        return Err(Error::PreconditionFailure {
            cond: f64::INFINITY,
        });
    }
    let mut perm = order.clone();
    let mut in_order = vec![false; nc];
    order.iter().for_each(|&i| in_order[i] = true);
    perm.extend((0..nc).filter(|&i| !in_order[i]));
    let l = DMatrix::from_fn(nc, rank, |k, c| {
        if k < rank && c > k {
            T::ZERO
        } else {
            dot(&rows[perm[k]], &qs[c])
        }
    });
    let condition = condition_of(&l.rows(0, rank).into_owned());
    if !(condition <= T::lit(MAX_LQ_CONDITION)) {
        return Err(Error::PreconditionFailure {
            cond: condition.to_f64_(),
        });
    }
    let q = DMatrix::from_fn(rank, j, |r, c| qs[r][c]);
    let b_t = qs.iter().map(|qr| dot(qr, rho_full)).collect();
    let eps_perm: Vec<T> = perm.iter().map(|&i| sys.eps[i]).collect();
    let eps_t = transformed_thresholds(&l, &eps_perm);
    Ok(LqSystem {
        l,
        perm,
        system: ConstraintSystem {
            c: q,
            b: b_t,
            eps: eps_t,
        },
        condition,
    })
}
