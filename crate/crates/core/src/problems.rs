//! Benchmark problems: Sedov blast, Gresho vortex, triple point and
//! Taylor–Green vortex on 2D Cartesian meshes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Domain;
use crate::hydro::{assemble_mass, Discretization, FullState, MassMatrices, Viscosity};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Sedov,
    Gresho,
    TriplePoint,
    TaylorGreen,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::Sedov,
        ProblemKind::Gresho,
        ProblemKind::TriplePoint,
        ProblemKind::TaylorGreen,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Sedov => "sedov",
            ProblemKind::Gresho => "gresho",
            ProblemKind::TriplePoint => "triple_point",
            ProblemKind::TaylorGreen => "taylor_green",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        ProblemKind::ALL
            .into_iter()
            .find(|p| p.name() == norm || (norm == "triplepoint" && *p == ProblemKind::TriplePoint))
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// Total internal energy deposited by the Sedov source.
pub const SEDOV_ENERGY: f64 = 0.25;

/// Geometry, material data and horizon of a problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub domain: Domain,
    /// Coarsest mesh size.
    pub h0: f64,
    pub viscosity: bool,
    pub t_final: f64,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind) -> Self {
        let (domain, h0, viscosity, t_final) = match kind {
            ProblemKind::Sedov => (Domain::unit_square(), 0.5, true, 0.3),
            ProblemKind::Gresho => (Domain::new([-0.5, -0.5], [0.5, 0.5]), 1.0 / 3.0, false, 0.4),
            ProblemKind::TriplePoint => (Domain::new([0.0, 0.0], [7.0, 3.0]), 1.0, true, 0.8),
            ProblemKind::TaylorGreen => (Domain::unit_square(), 0.5, false, 0.4),
        };
        ProblemSpec {
            kind,
            domain,
            h0,
            viscosity,
            t_final,
        }
    }

    pub fn gamma(&self, p: [f64; 2]) -> f64 {
        match self.kind {
            ProblemKind::Sedov => 1.4,
            ProblemKind::Gresho | ProblemKind::TaylorGreen => 5.0 / 3.0,
            ProblemKind::TriplePoint => {
                if p[0] <= 1.0 || p[1] > 1.5 {
                    1.5
                } else {
                    1.4
                }
            }
        }
    }

    pub fn density(&self, p: [f64; 2]) -> f64 {
        match self.kind {
            ProblemKind::TriplePoint if p[0] > 1.0 && p[1] > 1.5 => 0.125,
            _ => 1.0,
        }
    }

    /// Initial pressure; `None` for Sedov, whose energy is a point deposit.
    pub fn pressure(&self, p: [f64; 2]) -> Option<f64> {
        match self.kind {
            ProblemKind::Sedov => None,
            ProblemKind::Gresho => {
                let r = p[0].hypot(p[1]);
                Some(if r < 0.2 {
                    5.0 + 12.5 * r * r
                } else if r < 0.4 {
                    9.0 - 4.0 * 0.2_f64.ln() + 12.5 * r * r - 20.0 * r + 4.0 * r.ln()
                } else {
                    3.0 + 4.0 * 2.0_f64.ln()
                })
            }
            ProblemKind::TriplePoint => Some(if p[0] <= 1.0 { 1.0 } else { 0.1 }),
            ProblemKind::TaylorGreen => {
                let (cx, cy) = ((2.0 * PI * p[0]).cos(), (2.0 * PI * p[1]).cos());
                Some(100.0 + ((cx + cy) * 3.0 - 2.0) / 16.0)
            }
        }
    }

    pub fn velocity(&self, p: [f64; 2]) -> [f64; 2] {
        match self.kind {
            ProblemKind::Gresho => {
                let r = p[0].hypot(p[1]);
                let vphi = if r < 0.2 {
                    5.0 * r
                } else if r < 0.4 {
                    2.0 - 5.0 * r
                } else {
                    0.0
                };
                if r > 0.0 {
                    [-vphi * p[1] / r, vphi * p[0] / r]
                } else {
                    [0.0, 0.0]
                }
            }
            ProblemKind::TaylorGreen => {
                let (x, y) = (PI * p[0], PI * p[1]);
                [x.sin() * y.cos(), -x.cos() * y.sin()]
            }
            _ => [0.0, 0.0],
        }
    }
}

/// Discretization parameters shared by all problems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    /// Refinement level, `h = 2^-m h0`.
    pub m: u32,
    /// Kinematic polynomial order.
    pub k: usize,
    /// Gauss points per direction; `None` means `2k`, exact for polynomial
    /// integrands of degree `4k - 1`.
    pub points_per_dim: Option<usize>,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            m: 2,
            k: 2,
            points_per_dim: None,
        }
    }
}

impl DiscretizationConfig {
    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim.unwrap_or(2 * self.k)
    }
}

/// A problem ready to integrate.
pub struct Problem<T> {
    pub spec: ProblemSpec,
    pub disc: Discretization<T>,
    pub mass: MassMatrices<T>,
    pub initial: FullState<T>,
}

fn to_f64<T: Real>(p: [T; 2]) -> [f64; 2] {
    [p[0].to_f64_(), p[1].to_f64_()]
}

/// Builds mesh, spaces, mass matrices and the initial state. Velocity is
/// interpolated at the kinematic nodes; energy is the density-weighted L2
/// projection of `p / ((gamma - 1) rho)` (or the Sedov point deposit).
pub fn make_problem<T: Real>(spec: ProblemSpec, cfg: &DiscretizationConfig) -> Result<Problem<T>> {
    if !(spec.t_final > 0.0) {
        return Err(Error::Config(format!(
            "final time must be positive, got {}",
            spec.t_final
        )));
    }
    let viscosity = if spec.viscosity {
        Viscosity::on()
    } else {
        Viscosity::off()
    };
    let disc = Discretization::<T>::new(
        spec.domain,
        cfg.m,
        spec.h0,
        cfg.k,
        cfg.points_per_dim(),
        |p| T::lit(spec.density(to_f64(p))),
        |p| T::lit(spec.gamma(to_f64(p))),
        viscosity,
    )?;
    let mass = assemble_mass(&disc)?;

    let mut v = disc.space_v.interpolate_vector(|p| {
        let u = spec.velocity(to_f64(p));
        [T::lit(u[0]), T::lit(u[1])]
    });
    for d in disc.space_v.constrained_dofs() {
        v[d] = T::ZERO;
    }

    let n_e = disc.n_e();
    let e = if spec.kind == ProblemKind::Sedov {
        let mut best = (0, f64::INFINITY);
        for el in 0..disc.space_e.n_elements() {
            for (b, &d) in disc.space_e.element_dofs(el).iter().enumerate() {
                let p = to_f64(disc.space_e.local_node_position(&disc.mesh, el, b));
                let dist = p[0].hypot(p[1]);
                if dist < best.1 {
                    best = (d, dist);
                }
            }
        }
        let mut e = vec![T::ZERO; n_e];
        e[best.0] = T::lit(SEDOV_ENERGY) / mass.m_e_unity[best.0];
        e
    } else {
        let n_q = disc.rule.n_q();
        let mut rhs = vec![T::ZERO; n_e];
        for j in 0..disc.rule.len() {
            let p = to_f64(disc.point_position0(j));
            let pr = spec.pressure(p).unwrap_or(0.0);
            let eps = pr / ((spec.gamma(p) - 1.0) * spec.density(p));
            let w = mass.point_mass[j] * T::lit(eps);
            let el = disc.rule.element_of(j);
            for (c, &d) in disc.space_e.element_dofs(el).iter().enumerate() {
                rhs[d] += w * disc.tables.e_vals(j % n_q)[c];
            }
        }
        mass.solve_energy(&mut rhs);
        rhs
    };
    let initial = FullState {
        v,
        e,
        x: disc.x0.clone(),
        t: T::ZERO,
    };
    Ok(Problem {
        spec,
        disc,
        mass,
        initial,
    })
}
