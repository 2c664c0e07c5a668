//! Uniform Cartesian quadrilateral meshes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Axis-aligned rectangle `[lo.0, hi.0] x [lo.1, hi.1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Domain {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Domain { lo, hi }
    }

    pub fn unit_square() -> Self {
        Domain::new([0.0, 0.0], [1.0, 1.0])
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn area(&self) -> f64 {
        self.extent(0) * self.extent(1)
    }
}

/// Wall tags of a node: which outward normals constrain it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallTag {
    /// Node lies on a wall with normal along x.
    pub x: bool,
    /// Node lies on a wall with normal along y.
    pub y: bool,
}

impl WallTag {
    pub fn constrains(&self, component: usize) -> bool {
        match component {
            0 => self.x,
            _ => self.y,
        }
    }
}

/// Initially uniform Cartesian mesh of quadrilaterals, spacing `h = 2^-m h0`.
#[derive(Clone, Debug)]
pub struct Mesh2D<T> {
    pub domain: Domain,
    pub refinement: u32,
    pub h0: f64,
    pub h: T,
    /// Element counts along x and y.
    pub cells: [usize; 2],
    /// Corner node indices per element, counterclockwise from the lower-left.
    pub elements: Vec<[usize; 4]>,
    pub node_coords0: Vec<[T; 2]>,
    pub boundary: Vec<WallTag>,
}

impl<T: Real> Mesh2D<T> {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords0.len()
    }

    /// Lower-left corner of element `e` in the initial configuration.
    pub fn element_origin(&self, e: usize) -> [T; 2] {
        self.node_coords0[self.elements[e][0]]
    }

    /// Element `(ix, iy)` position in the Cartesian grid.
    pub fn element_cell(&self, e: usize) -> [usize; 2] {
        [e % self.cells[0], e / self.cells[0]]
    }
}

/// Builds a uniform quad mesh on `domain` with `h = 2^-m h0`.
pub fn build_cartesian_mesh<T: Real>(domain: Domain, m: u32, h0: f64) -> Result<Mesh2D<T>> {
    if !(h0 > 0.0) {
        return Err(Error::Config(format!(
            "coarsest mesh size must be positive, got {h0}"
        )));
    }
    let h = h0 / f64::from(2u32.pow(m));
    let mut cells = [0usize; 2];
    for axis in 0..2 {
        let len = domain.extent(axis);
        if !(len > 0.0) {
            return Err(Error::Config(format!(
                "domain extent along axis {axis} must be positive"
            )));
        }
        let n = len / h;
        let rounded = n.round();
        if (n - rounded).abs() > 1e-9 * n.max(1.0) || rounded < 1.0 {
            return Err(Error::Config(format!(
                "extent {len} along axis {axis} is not divisible into cells of size {h}"
            )));
        }
        cells[axis] = rounded as usize;
    }
    let [nx, ny] = cells;
    let mut node_coords0 = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = domain.lo[0] + i as f64 * h;
            let y = domain.lo[1] + j as f64 * h;
            node_coords0.push([T::lit(x), T::lit(y)]);
            boundary.push(WallTag {
                x: i == 0 || i == nx,
                y: j == 0 || j == ny,
            });
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let n0 = i + (nx + 1) * j;
            elements.push([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1]);
        }
    }
    Ok(Mesh2D {
        domain,
        refinement: m,
        h0,
        h: T::lit(h),
        cells,
        elements,
        node_coords0,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m0 = build_cartesian_mesh::<f64>(Domain::unit_square(), 0, 0.5).unwrap();
        assert_eq!(m0.n_elements(), 4);
        assert_eq!(m0.n_nodes(), 9);
        let m1 = build_cartesian_mesh::<f64>(Domain::unit_square(), 1, 0.5).unwrap();
        assert_eq!(m1.n_elements(), 16);
    }

    #[test]
    fn sedov_refinement_two() {
        // 8 cells per direction, the 2D section of an 8^3 hexahedral mesh.
        let m = build_cartesian_mesh::<f64>(Domain::unit_square(), 2, 0.5).unwrap();
        assert_eq!(m.cells, [8, 8]);
        assert_eq!(m.n_elements(), 64);
        assert_eq!(m.h, 0.125);
    }

    #[test]
    fn non_divisible_extent_is_config_error() {
        let r = build_cartesian_mesh::<f64>(Domain::new([0.0, 0.0], [1.0, 0.3]), 0, 0.25);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn positive_reference_areas_and_wall_tags() {
        let m = build_cartesian_mesh::<f64>(Domain::new([0.0, 0.0], [7.0, 3.0]), 2, 1.0).unwrap();
        for el in &m.elements {
            let p: Vec<_> = el.iter().map(|&n| m.node_coords0[n]).collect();
            let area = 0.5
                * (0..4)
                    .map(|i| {
                        let a = p[i];
                        let b = p[(i + 1) % 4];
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum::<f64>();
            assert!(area > 0.0);
        }
        for (c, tag) in m.node_coords0.iter().zip(&m.boundary) {
            assert_eq!(tag.x, c[0] == 0.0 || c[0] == 7.0);
            assert_eq!(tag.y, c[1] == 0.0 || c[1] == 3.0);
        }
    }
}
