//! Random sampling helpers shared by the integration tests.

#![allow(dead_code)]

use qctrl_core::state::{BipartitePartition, StateMatrix};
use qctrl_core::tensor::{expm, ComplexMatrix, C64};
use rand::Rng;

/// A complex matrix with entries uniform in the unit square.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// A random normalized state on the given partition.
pub fn random_state<R: Rng>(rng: &mut R, p: BipartitePartition) -> StateMatrix {
    StateMatrix::normalized(p, random_matrix(rng, p.rows(), p.cols()))
        .expect("nonzero random matrix")
}

/// A random unitary `exp(A - Aᴴ)`.
pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> ComplexMatrix {
    let a = random_matrix(rng, d, d);
    expm(&(&a - a.adjoint())).expect("finite generator")
}

/// Projection of `x` onto the tangent space of the unit sphere at `c`.
pub fn tangent_projection(c: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    let radial: f64 = c.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    x - c * C64::from(radial)
}
