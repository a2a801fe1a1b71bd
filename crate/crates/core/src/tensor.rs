//! Dense complex matrix kernel.
//!
//! Pauli matrices carry an overall factor of one half,
//!
//! ```text
//! σ1 = ½[[0, 1], [1, 0]],  σ2 = ½[[0, i], [-i, 0]],  σ3 = ½[[1, 0], [0, -1]],
//! ```
//!
//! so `σ2` is minus one half of the textbook `σ_y`. With this choice the
//! commutators read `[σj, σk] = -i ε_jkl σl`. Every closed form elsewhere in
//! the crate (phases `e^{∓iJt/4}`, bracket tables, growth coefficients) is
//! written against this normalization.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QctrlError, Result};

/// Dense complex matrix used for every operator and state in the crate.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Shorthand for a complex scalar.
pub type C64 = Complex64;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

/// Real scalar as a complex number.
#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Index of a single-qubit Pauli factor; `0` denotes the 2×2 identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliIndex(u8);

impl PauliIndex {
    /// Identity factor.
    pub const ID: PauliIndex = PauliIndex(0);
    /// `σ1`.
    pub const X: PauliIndex = PauliIndex(1);
    /// `σ2`.
    pub const Y: PauliIndex = PauliIndex(2);
    /// `σ3`.
    pub const Z: PauliIndex = PauliIndex(3);

    /// Validates and wraps a raw index.
    pub fn new(j: u8) -> Result<Self> {
        if j <= 3 {
            Ok(PauliIndex(j))
        } else {
            Err(QctrlError::InvalidPauliIndex(j))
        }
    }

    /// The raw index in `0..=3`.
    #[inline]
    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for PauliIndex {
    type Error = QctrlError;

    fn try_from(j: u8) -> Result<Self> {
        PauliIndex::new(j)
    }
}

/// Returns the 2×2 Pauli matrix with the one-half normalization, or the
/// identity for index 0.
pub fn pauli(j: PauliIndex) -> ComplexMatrix {
    let z = C64::new(0.0, 0.0);
    let h = re(0.5);
    let ih = C64::new(0.0, 0.5);
    match j.get() {
        0 => ComplexMatrix::identity(2, 2),
        1 => ComplexMatrix::from_row_slice(2, 2, &[z, h, h, z]),
        2 => ComplexMatrix::from_row_slice(2, 2, &[z, ih, -ih, z]),
        _ => ComplexMatrix::from_row_slice(2, 2, &[h, z, z, -h]),
    }
}

/// Pauli matrix from a raw index.
pub fn pauli_raw(j: u8) -> Result<ComplexMatrix> {
    Ok(pauli(PauliIndex::new(j)?))
}

/// Standard Kronecker product; the block structure is `[a_ij B]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a sequence of factors, left to right.
pub fn kron_all<'a, I>(factors: I) -> ComplexMatrix
where
    I: IntoIterator<Item = &'a ComplexMatrix>,
{
    factors
        .into_iter()
        .fold(ComplexMatrix::identity(1, 1), |acc, f| kron(&acc, f))
}

/// Embeds the single-qubit operator `op` at `site` (1-based) of an
/// `n`-qubit register: `I^{⊗(site-1)} ⊗ op ⊗ I^{⊗(n-site)}`.
pub fn embed_operator(op: &ComplexMatrix, site: usize, n: usize) -> Result<ComplexMatrix> {
    if site == 0 || site > n {
        return Err(QctrlError::SiteOutOfRange { site, qubits: n });
    }
    if op.nrows() != 2 || op.ncols() != 2 {
        return Err(QctrlError::DimensionMismatch(format!(
            "single-site operator must be 2x2, got {}x{}",
            op.nrows(),
            op.ncols()
        )));
    }
    let left = ComplexMatrix::identity(1 << (site - 1), 1 << (site - 1));
    let right = ComplexMatrix::identity(1 << (n - site), 1 << (n - site));
    Ok(kron(&kron(&left, op), &right))
}

/// Embeds the Pauli factor `σ_j` at `site` (1-based) of an `n`-qubit register.
pub fn embed_site(j: PauliIndex, site: usize, n: usize) -> Result<ComplexMatrix> {
    embed_operator(&pauli(j), site, n)
}

/// Matrix commutator `AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Frobenius norm.
#[inline]
pub fn frobenius(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise modulus.
#[inline]
pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius distance of `aᴴa` from the identity.
pub fn unitarity_deviation(a: &ComplexMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    frobenius(&(a.adjoint() * a - ComplexMatrix::identity(n, n)))
}

/// Frobenius norm of `a + aᴴ`.
pub fn skew_hermitian_deviation(a: &ComplexMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    frobenius(&(a + a.adjoint()))
}

/// Frobenius norm of `a - aᴴ`.
pub fn hermitian_deviation(a: &ComplexMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    frobenius(&(a - a.adjoint()))
}

/// Errors unless `a` is square.
pub fn require_square(a: &ComplexMatrix) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(QctrlError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        })
    }
}

/// Errors unless every entry is finite.
pub fn require_finite(a: &ComplexMatrix, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(QctrlError::NonFinite(what.to_string()))
    }
}

/// Matrix exponential.
///
/// Skew-Hermitian and Hermitian inputs go through a Hermitian
/// eigendecomposition, which keeps the result unitary (respectively
/// positive definite) to roundoff. Other inputs use scaling and squaring
/// with a Padé approximant.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_square(a)?;
    require_finite(a, "expm input")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let scale = frobenius(a).max(1.0);
    let tol = 1e-13 * scale;
    if skew_hermitian_deviation(a) <= tol {
        // a = -i h with h Hermitian
        let h = a.map(|z| I * z);
        let h = (&h + h.adjoint()).map(|z| z * 0.5);
        Ok(hermitian_function(&h, |d| (-I * d).exp()))
    } else if hermitian_deviation(a) <= tol {
        let h = (a + a.adjoint()).map(|z| z * 0.5);
        Ok(hermitian_function(&h, |d| re(d.exp())))
    } else {
        Ok(a.clone().exp())
    }
}

/// Applies a scalar function to a Hermitian matrix through its spectrum.
fn hermitian_function<F>(h: &ComplexMatrix, f: F) -> ComplexMatrix
where
    F: Fn(f64) -> C64,
{
    let eig = SymmetricEigen::new(h.clone());
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, &d) in eig.eigenvalues.iter().enumerate() {
        let w = f(d);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
    }
    scaled * u.adjoint()
}

/// Conjugates a pair of operators by the one-parameter local group:
/// returns `(e^{-sξ1} Σ1 e^{sξ1}, e^{-sξ2} Σ2 e^{sξ2})`. The pair acts on
/// a state matrix `C` as `A C Bᵀ`.
pub fn adjoint_conjugate(
    xi1: &ComplexMatrix,
    xi2: &ComplexMatrix,
    s: f64,
    sigma1: &ComplexMatrix,
    sigma2: &ComplexMatrix,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    require_square(xi1)?;
    require_square(xi2)?;
    if xi1.shape() != sigma1.shape() || xi2.shape() != sigma2.shape() {
        return Err(QctrlError::DimensionMismatch(format!(
            "generators {:?}/{:?} do not match operators {:?}/{:?}",
            xi1.shape(),
            xi2.shape(),
            sigma1.shape(),
            sigma2.shape()
        )));
    }
    let conj = |xi: &ComplexMatrix, sigma: &ComplexMatrix| -> Result<ComplexMatrix> {
        let fwd = expm(&xi.map(|z| z * s))?;
        let bwd = expm(&xi.map(|z| -z * s))?;
        Ok(bwd * sigma * fwd)
    };
    Ok((conj(xi1, sigma1)?, conj(xi2, sigma2)?))
}

/// Builds a matrix from a row-major list of `[re, im]` pairs.
pub fn from_pairs(rows: usize, cols: usize, pairs: &[[f64; 2]]) -> Result<ComplexMatrix> {
    if rows == 0 || cols == 0 || pairs.len() != rows * cols {
        return Err(QctrlError::DimensionMismatch(format!(
            "{} entries cannot fill a {}x{} matrix",
            pairs.len(),
            rows,
            cols
        )));
    }
    let entries: Vec<C64> = pairs.iter().map(|p| C64::new(p[0], p[1])).collect();
    let m = ComplexMatrix::from_row_slice(rows, cols, &entries);
    require_finite(&m, "matrix entries")?;
    Ok(m)
}

/// Row-major entries of a matrix.
pub fn row_major(a: &ComplexMatrix) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len());
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            out.push(a[(r, c)]);
        }
    }
    out
}
