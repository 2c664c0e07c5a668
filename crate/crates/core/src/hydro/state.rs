use crate::scalar::Real;

/// Full-order coefficient state `w = (v, e, x)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FullState<T> {
    pub v: Vec<T>,
    pub e: Vec<T>,
    pub x: Vec<T>,
    pub t: T,
}

impl<T: Real> FullState<T> {
    pub fn all_finite(&self) -> bool {
        self.v
            .iter()
            .chain(&self.e)
            .chain(&self.x)
            .all(|c| c.is_finite())
    }
}

/// Internal, kinetic and total energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies<T> {
    pub internal: T,
    pub kinetic: T,
    pub total: T,
}

impl<T: Real> Energies<T> {
    pub fn new(internal: T, kinetic: T) -> Self {
        Energies {
            internal,
            kinetic,
            total: internal + kinetic,
        }
    }
}
