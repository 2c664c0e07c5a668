//! Force matrix `F_ij = int (sigma : grad theta_i^v) theta_j^e dx` and the
//! force vectors `F_v = F 1`, `F_e = F^T v'`.

use super::discretization::Discretization;
use super::state::FullState;
use crate::error::Result;
use crate::fem::geometry::gather;
use crate::scalar::Real;

/// Element-block storage of the force matrix.
#[derive(Clone, Debug)]
pub struct ForceMatrix<T> {
    n_v: usize,
    n_e: usize,
    nv_loc: usize,
    ne_loc: usize,
    /// Per element, row-major `nv_loc x ne_loc`.
    blocks: Vec<T>,
}

impl<T: Real> ForceMatrix<T> {
    fn block(&self, el: usize) -> &[T] {
        let s = self.nv_loc * self.ne_loc;
        &self.blocks[el * s..(el + 1) * s]
    }

    pub fn n_elements(&self) -> usize {
        self.blocks.len() / (self.nv_loc * self.ne_loc)
    }

    /// `F 1_E`.
    pub fn mul_unity(&self, disc: &Discretization<T>) -> Vec<T> {
        let mut out = vec![T::ZERO; self.n_v];
        for el in 0..self.n_elements() {
            let b = self.block(el);
            let dv = disc.space_v.element_dofs(el);
            for (a, &gi) in dv.iter().enumerate() {
                out[gi] += b[a * self.ne_loc..(a + 1) * self.ne_loc]
                    .iter()
                    .copied()
                    .sum::<T>();
            }
        }
        out
    }

    /// `F^T v`.
    pub fn tr_mul(&self, disc: &Discretization<T>, v: &[T]) -> Vec<T> {
        let mut out = vec![T::ZERO; self.n_e];
        for el in 0..self.n_elements() {
            let b = self.block(el);
            let dv = disc.space_v.element_dofs(el);
            let de = disc.space_e.element_dofs(el);
            for (a, &gi) in dv.iter().enumerate() {
                let va = v[gi];
                for (c, &gj) in de.iter().enumerate() {
                    out[gj] += b[a * self.ne_loc + c] * va;
                }
            }
        }
        out
    }

    /// Dense copy, `N_v x N_e` row-major (tests and diagnostics).
    pub fn to_dense(&self, disc: &Discretization<T>) -> Vec<T> {
        let mut out = vec![T::ZERO; self.n_v * self.n_e];
        for el in 0..self.n_elements() {
            let b = self.block(el);
            let dv = disc.space_v.element_dofs(el);
            let de = disc.space_e.element_dofs(el);
            for (a, &gi) in dv.iter().enumerate() {
                for (c, &gj) in de.iter().enumerate() {
                    out[gi * self.n_e + gj] += b[a * self.ne_loc + c];
                }
            }
        }
        out
    }
}

/// Local element coefficient buffers.
#[derive(Default)]
pub(crate) struct LocalBuffers<T> {
    pub x: Vec<T>,
    pub v: Vec<T>,
    pub e: Vec<T>,
    pub f: Vec<T>,
}

impl<T: Real> LocalBuffers<T> {
    pub fn load(&mut self, disc: &Discretization<T>, state: &FullState<T>, el: usize) {
        let dv = disc.space_v.element_dofs(el);
        gather(&state.x, dv, &mut self.x);
        gather(&state.v, dv, &mut self.v);
        gather(&state.e, disc.space_e.element_dofs(el), &mut self.e);
        self.f.resize(dv.len(), T::ZERO);
    }
}

/// Quadrature assembly of the force matrix at `state`.
pub fn assemble_force_matrix<T: Real>(
    disc: &Discretization<T>,
    state: &FullState<T>,
) -> Result<ForceMatrix<T>> {
    let nv_loc = disc.space_v.n_local();
    let ne_loc = disc.space_e.n_local();
    let n_q = disc.rule.n_q();
    let n_el = disc.space_v.n_elements();
    let mut blocks = vec![T::ZERO; n_el * nv_loc * ne_loc];
    let mut buf = LocalBuffers::default();
    for el in 0..n_el {
        buf.load(disc, state, el);
        let block = &mut blocks[el * nv_loc * ne_loc..(el + 1) * nv_loc * ne_loc];
        for q in 0..n_q {
            let j = el * n_q + q;
            let ps = disc.eval_point(j, &buf.x, &buf.v, &buf.e)?;
            disc.force_integrand(j, &ps, &mut buf.f);
            let w = disc.rule.full_weights[j];
            let ev = disc.tables.e_vals(q);
            for a in 0..nv_loc {
                let fa = w * buf.f[a];
                for c in 0..ne_loc {
                    block[a * ne_loc + c] += fa * ev[c];
                }
            }
        }
    }
    Ok(ForceMatrix {
        n_v: disc.n_v(),
        n_e: disc.n_e(),
        nv_loc,
        ne_loc,
        blocks,
    })
}

/// Direct assembly of `F_v(w) = int sigma : grad theta_i^v dx`.
pub fn assemble_velocity_force<T: Real>(
    disc: &Discretization<T>,
    state: &FullState<T>,
) -> Result<Vec<T>> {
    let n_q = disc.rule.n_q();
    let mut out = vec![T::ZERO; disc.n_v()];
    let mut buf = LocalBuffers::default();
    for el in 0..disc.space_v.n_elements() {
        buf.load(disc, state, el);
        let dv = disc.space_v.element_dofs(el);
        for q in 0..n_q {
            let j = el * n_q + q;
            let ps = disc.eval_point(j, &buf.x, &buf.v, &buf.e)?;
            disc.force_integrand(j, &ps, &mut buf.f);
            let w = disc.rule.full_weights[j];
            for (a, &gi) in dv.iter().enumerate() {
                out[gi] += w * buf.f[a];
            }
        }
    }
    Ok(out)
}

/// Direct assembly of `F_e(w, v') = int (sigma(w) : grad v') theta_i^e dx`.
pub fn assemble_energy_force<T: Real>(
    disc: &Discretization<T>,
    state: &FullState<T>,
    v_test: &[T],
) -> Result<Vec<T>> {
    let n_q = disc.rule.n_q();
    let mut out = vec![T::ZERO; disc.n_e()];
    let mut buf = LocalBuffers::default();
    let mut vt = Vec::new();
    for el in 0..disc.space_v.n_elements() {
        buf.load(disc, state, el);
        gather(v_test, disc.space_v.element_dofs(el), &mut vt);
        let de = disc.space_e.element_dofs(el);
        for q in 0..n_q {
            let j = el * n_q + q;
            let ps = disc.eval_point(j, &buf.x, &buf.v, &buf.e)?;
            let grad = crate::fem::geometry::map_jacobian(&disc.tables, q, &vt) * ps.a_inv;
            let s = &ps.stress.sigma;
            let power = s[(0, 0)] * grad[(0, 0)]
                + s[(0, 1)] * grad[(0, 1)]
                + s[(1, 0)] * grad[(1, 0)]
                + s[(1, 1)] * grad[(1, 1)];
            let w = disc.rule.full_weights[j] * ps.det_j * power;
            for (c, &gj) in de.iter().enumerate() {
                out[gj] += w * disc.tables.e_vals(q)[c];
            }
        }
    }
    Ok(out)
}
