//! Simulation and analysis of controlled NMR multi-qubit dynamics in the
//! bipartite matrix picture.
//!
//! An `n`-qubit pure state is a normalized `2^ℓ × 2^m` matrix `C`. The
//! crate provides:
//!
//! * [`tensor`]: Pauli matrices (one-half normalized), Kronecker products,
//!   matrix exponentials.
//! * [`state`]: the state space, the entanglement measure
//!   `F(C) = det(I - CCᴴ)`, Schmidt data, orbit types and the
//!   vertical/horizontal split of tangent vectors.
//! * [`lie`]: the tensor-product bracket, linear vector fields
//!   `X_{A⊗B}(C) = A C Bᵀ`, Pauli-string algebra and Lie closure.
//! * [`dynamics`]: drift and control Hamiltonians, exact and power-series
//!   solvers and a Runge–Kutta reference integrator.
//! * [`entanglement`]: closed-form entanglement diagnostics along
//!   controlled two-qubit trajectories.
//! * [`controllability`]: spin-graph connectivity and closure-based
//!   certification of pure-state controllability.

pub mod controllability;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod fit;
pub mod lie;
pub mod par;
pub mod state;
pub mod tensor;

pub use error::{QctrlError, Result};
