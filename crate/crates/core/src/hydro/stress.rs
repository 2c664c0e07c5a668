//! Ideal-gas equation of state and the stress tensor `sigma = -p I + sigma_a`.

use nalgebra::Matrix2;

use crate::scalar::Real;

/// `p = (gamma - 1) rho e`.
#[inline]
pub fn eos_pressure<T: Real>(gamma: T, rho: T, e: T) -> T {
    (gamma - T::ONE) * rho * e
}

/// `c_s = sqrt(gamma p / rho)`, with negative pressures treated as zero.
#[inline]
pub fn sound_speed<T: Real>(gamma: T, rho: T, p: T) -> T {
    (gamma * p.max(T::ZERO) / rho).sqrt()
}

/// Artificial viscosity coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viscosity<T> {
    pub enabled: bool,
    /// Linear (sound-speed) coefficient.
    pub q1: T,
    /// Quadratic (compression-rate) coefficient.
    pub q2: T,
}

impl<T: Real> Viscosity<T> {
    pub fn off() -> Self {
        Viscosity {
            enabled: false,
            q1: T::lit(0.5),
            q2: T::lit(2.0),
        }
    }

    pub fn on() -> Self {
        Viscosity {
            enabled: true,
            ..Self::off()
        }
    }
}

/// Material model: adiabatic index per quadrature point plus viscosity.
#[derive(Clone, Debug)]
pub struct StressModel<T> {
    pub gamma: Vec<T>,
    pub viscosity: Viscosity<T>,
}

#[derive(Clone, Copy, Debug)]
pub struct StressEval<T> {
    pub sigma: Matrix2<T>,
    pub pressure: T,
    pub sound_speed: T,
    /// Viscous coefficient `mu` (zero when inactive).
    pub mu: T,
}

/// Stress at a point. The viscous part `mu * sym(grad v)` with
/// `mu = rho (q2 l^2 |div v| + q1 l c_s)` acts only under compression.
pub fn eval_stress<T: Real>(
    visc: &Viscosity<T>,
    gamma: T,
    rho: T,
    e: T,
    grad_v: &Matrix2<T>,
    length: T,
) -> StressEval<T> {
    let p = eos_pressure(gamma, rho, e);
    let cs = sound_speed(gamma, rho, p);
    let mut sigma = Matrix2::identity() * (-p);
    let mut mu = T::ZERO;
    if visc.enabled {
        let div = grad_v[(0, 0)] + grad_v[(1, 1)];
        if div < T::ZERO {
            mu = rho * (visc.q2 * length * length * div.abs() + visc.q1 * length * cs);
            let sym = (grad_v + grad_v.transpose()) * T::lit(0.5);
            sigma += sym * mu;
        }
    }
    StressEval {
        sigma,
        pressure: p,
        sound_speed: cs,
        mu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sedov_pressure() {
        assert!((eos_pressure(1.4_f64, 1.0, 0.25) - 0.1).abs() < 1e-15);
        assert_eq!(eos_pressure(1.4, 1.0, 0.0), 0.0);
    }

    #[test]
    fn gresho_energy_from_pressure() {
        let gamma: f64 = 5.0 / 3.0;
        let e = 5.0 / ((gamma - 1.0) * 1.0);
        assert!((e - 7.5).abs() < 1e-14);
        assert!((eos_pressure(gamma, 1.0, e) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn pressure_only_stress() {
        let s = eval_stress(
            &Viscosity::off(),
            1.4,
            1.0,
            0.25,
            &Matrix2::new(-1.0, 0.0, 0.0, 0.0),
            0.1,
        );
        assert!((s.sigma - Matrix2::identity() * -0.1).norm() < 1e-15);
    }

    #[test]
    fn expansion_has_no_viscosity() {
        let g = Matrix2::new(0.5, 0.2, 0.1, 0.3);
        let s = eval_stress(&Viscosity::on(), 1.4, 1.0, 0.25, &g, 0.1);
        assert_eq!(s.mu, 0.0);
        assert!((s.sigma - Matrix2::identity() * -0.1).norm() < 1e-15);
    }

    #[test]
    fn uniaxial_compression_viscous_term() {
        // Hand evaluation: rho=2, e=0.5, gamma=1.4 -> p=0.4, c_s=sqrt(1.4*0.4/2)=sqrt(0.28).
        // grad v = diag(-3, 0), div = -3, l = 0.1.
        // mu = 2 (2 * 0.01 * 3 + 0.5 * 0.1 * sqrt(0.28)) = 0.12 + 0.1 sqrt(0.28).
        let g = Matrix2::new(-3.0, 0.0, 0.0, 0.0);
        let s = eval_stress(&Viscosity::on(), 1.4, 2.0, 0.5, &g, 0.1);
        let mu = 0.12 + 0.1 * 0.28f64.sqrt();
        assert!((s.mu - mu).abs() < 1e-15);
        assert!((s.sigma[(0, 0)] - (-0.4 - 3.0 * mu)).abs() < 1e-14);
        assert!((s.sigma[(1, 1)] + 0.4).abs() < 1e-15);
        assert_eq!(s.sigma[(0, 1)], 0.0);
    }
}
