use rand::Rng;

use crate::symlin::SymMatrix;

pub fn random_sym<R: Rng>(rng: &mut R, m: usize) -> SymMatrix<f64> {
    SymMatrix::from_lower_fn(m, |_, _| rng.random_range(-1.0..1.0))
}

/// `R Rᵀ + δI` with uniform entries, comfortably conditioned.
pub fn random_spd<R: Rng>(rng: &mut R, m: usize) -> SymMatrix<f64> {
    let r = nalgebra::DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let mut s = SymMatrix::symmetrize(&(&r * r.transpose()));
    s.axpy(0.5, &SymMatrix::identity(m));
    s
}
