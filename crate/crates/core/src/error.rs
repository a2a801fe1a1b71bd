//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the numerical kernels and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QctrlError {
    /// A Pauli index outside `0..=3` was requested.
    #[error("invalid Pauli index {0}; expected 0, 1, 2 or 3")]
    InvalidPauliIndex(u8),

    /// A qubit site was outside `1..=n`.
    #[error("site {site} out of range for {qubits} qubit(s)")]
    SiteOutOfRange { site: usize, qubits: usize },

    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A square matrix was required.
    #[error("matrix is {rows}x{cols}; a square matrix is required")]
    NotSquare { rows: usize, cols: usize },

    /// A matrix expected to be unitary is not.
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    /// A matrix expected to be skew-Hermitian is not.
    #[error("matrix is not skew-Hermitian (deviation {deviation:.3e})")]
    NotSkewHermitian { deviation: f64 },

    /// A state is not normalized within tolerance.
    #[error("state norm deviates from one by {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    /// A bipartite partition violates `0 < ell <= m`.
    #[error("invalid partition ell={ell}, m={m}; need 0 < ell <= m")]
    InvalidPartition { ell: usize, m: usize },

    /// The operation is only defined for a two-qubit (1+1) partition.
    #[error("operation requires a two-qubit 1+1 partition, got ell={ell}, m={m}")]
    NotTwoQubit { ell: usize, m: usize },

    /// A numerical decomposition did not converge.
    #[error("numerical decomposition failed: {0}")]
    Decomposition(String),

    /// An input contained NaN or infinity.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// A precondition on the arguments does not hold.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The phase of a vanishing determinant was requested.
    #[error("determinant vanishes; its phase is undefined (use the diagonal-state path)")]
    SingularDeterminant,

    /// An iterative procedure hit its iteration cap.
    #[error("no stabilization after {0} iterations")]
    IterationLimit(usize),

    /// A bracket result matched no signed basis element.
    #[error("bracket {0} matches no signed basis element")]
    UnmatchedBracket(String),

    /// A coupling required by a construction is absent.
    #[error("coupling between sites {0} and {1} is zero")]
    MissingCoupling(usize, usize),

    /// A coupling forbidden by a construction is present.
    #[error("coupling between sites {0} and {1} must be zero")]
    UnexpectedCoupling(usize, usize),

    /// Two sites are not joined by any path in the spin graph.
    #[error("sites {0} and {1} lie in different components of the spin graph")]
    Disconnected(usize, usize),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, QctrlError>;
