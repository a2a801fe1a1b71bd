//! Lie-algebraic machinery.
//!
//! * [`bracket`]: the tensor-product bracket on formal sums of `A⊗B`, the
//!   realization map to dense `2^n × 2^n` matrices, and the linear vector
//!   fields `X_{A⊗B}(C) = A C Bᵀ`. The vector-field bracket is the negated
//!   tensor bracket (the correspondence is an anti-isomorphism).
//! * [`pauli`]: sparse real combinations of `i·σ_{j1}⊗⋯⊗σ_{jn}`.
//! * [`closure`]: Lie closure of a set of Pauli sums.

pub mod bracket;
pub mod closure;
pub mod pauli;

pub use bracket::{
    appendix_a_table, apply_field, apply_field_matrix, f_map, field_bracket, identify,
    render_table, tensor_bracket, BracketRow, FieldLabel, OperatorSum, SignedLabel, TensorTerm,
};
pub use closure::{lie_closure, lie_closure_with, ClosureResult};
pub use pauli::{pauli_string_bracket, PauliString, PauliSum};
