//! Geometry of the bipartite state space.
//!
//! An `n`-qubit pure state is stored as a `2^ℓ × 2^m` matrix `C` (with
//! `n = ℓ + m`, `ℓ ≤ m`) whose row index is the big-endian value of the
//! first `ℓ` bits and whose column index is the big-endian value of the last
//! `m` bits. The local group `U(2^ℓ) ⊗ U(2^m)` acts by `C ↦ g C hᵀ`; its
//! orbits are labelled by the singular values of `C`. Tangent vectors split
//! into a vertical part (along the orbit, entanglement-preserving) and a
//! horizontal part (the metric complement).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{QctrlError, Result};
use crate::tensor::{
    frobenius, pauli, re, require_finite, skew_hermitian_deviation, unitarity_deviation,
    ComplexMatrix, PauliIndex, C64, I,
};

/// Default tolerance for normalization checks on constructed states.
pub const NORM_TOL: f64 = 1e-10;

/// Default band for grouping near-equal singular values.
pub const SINGULAR_VALUE_TOL: f64 = 1e-8;

/// Eigenvalue cutoff, relative to the largest, for Gram pseudo-inverses.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Split of `n = ell + m` qubits into a row block and a column block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BipartitePartition {
    ell: usize,
    m: usize,
}

impl BipartitePartition {
    /// Validates `0 < ell <= m`.
    pub fn new(ell: usize, m: usize) -> Result<Self> {
        if ell == 0 || ell > m || ell + m > 16 {
            return Err(QctrlError::InvalidPartition { ell, m });
        }
        Ok(Self { ell, m })
    }

    /// The 1+1 partition of a two-qubit register.
    pub fn two_qubit() -> Self {
        Self { ell: 1, m: 1 }
    }

    /// Number of row-block qubits.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Number of column-block qubits.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Total qubit count.
    pub fn n(&self) -> usize {
        self.ell + self.m
    }

    /// Row dimension `2^ell`.
    pub fn rows(&self) -> usize {
        1 << self.ell
    }

    /// Column dimension `2^m`.
    pub fn cols(&self) -> usize {
        1 << self.m
    }

    /// Whether this is the 1+1 partition.
    pub fn is_two_qubit(&self) -> bool {
        self.ell == 1 && self.m == 1
    }

    fn require_two_qubit(&self) -> Result<()> {
        if self.is_two_qubit() {
            Ok(())
        } else {
            Err(QctrlError::NotTwoQubit {
                ell: self.ell,
                m: self.m,
            })
        }
    }
}

/// A normalized `2^ℓ × 2^m` state matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    partition: BipartitePartition,
    c: ComplexMatrix,
}

impl StateMatrix {
    /// Wraps `c`, checking shape and `tr(CᴴC) = 1` within [`NORM_TOL`].
    pub fn new(partition: BipartitePartition, c: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(partition, c, NORM_TOL)
    }

    /// Wraps `c` with a caller-chosen normalization tolerance.
    pub fn with_tolerance(
        partition: BipartitePartition,
        c: ComplexMatrix,
        tol: f64,
    ) -> Result<Self> {
        if c.nrows() != partition.rows() || c.ncols() != partition.cols() {
            return Err(QctrlError::DimensionMismatch(format!(
                "state is {}x{}, partition needs {}x{}",
                c.nrows(),
                c.ncols(),
                partition.rows(),
                partition.cols()
            )));
        }
        require_finite(&c, "state matrix")?;
        let deviation = (frobenius(&c).powi(2) - 1.0).abs();
        if deviation > tol {
            return Err(QctrlError::NotNormalized { deviation });
        }
        Ok(Self { partition, c })
    }

    /// Infers the partition from the shape of `c`.
    pub fn from_matrix(c: ComplexMatrix) -> Result<Self> {
        let partition = partition_for_shape(c.nrows(), c.ncols())?;
        Self::new(partition, c)
    }

    /// Wraps `c` without checking normalization. Used for intermediate
    /// values inside integrators.
    pub(crate) fn unchecked(partition: BipartitePartition, c: ComplexMatrix) -> Self {
        Self { partition, c }
    }

    /// Normalizes `c` and wraps it.
    pub fn normalized(partition: BipartitePartition, c: ComplexMatrix) -> Result<Self> {
        let norm = frobenius(&c);
        if norm == 0.0 || !norm.is_finite() {
            return Err(QctrlError::InvalidArgument(
                "cannot normalize a zero state".into(),
            ));
        }
        Self::new(partition, c.map(|z| z / norm))
    }

    /// `diag(λ1, λ2)` for the two-qubit partition.
    pub fn diagonal(lambda1: f64, lambda2: f64) -> Result<Self> {
        let mut c = ComplexMatrix::zeros(2, 2);
        c[(0, 0)] = re(lambda1);
        c[(1, 1)] = re(lambda2);
        Self::new(BipartitePartition::two_qubit(), c)
    }

    /// The partition.
    pub fn partition(&self) -> BipartitePartition {
        self.partition
    }

    /// The underlying matrix.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.c
    }

    /// Consumes the state and returns its matrix.
    pub fn into_matrix(self) -> ComplexMatrix {
        self.c
    }

    /// `|tr(CᴴC) - 1|`.
    pub fn norm_deviation(&self) -> f64 {
        (frobenius(&self.c).powi(2) - 1.0).abs()
    }
}

/// Partition whose block sizes match a `rows × cols` matrix.
pub fn partition_for_shape(rows: usize, cols: usize) -> Result<BipartitePartition> {
    if !rows.is_power_of_two() || !cols.is_power_of_two() {
        return Err(QctrlError::DimensionMismatch(format!(
            "{rows}x{cols} is not a 2^ell x 2^m shape"
        )));
    }
    BipartitePartition::new(
        rows.trailing_zeros() as usize,
        cols.trailing_zeros() as usize,
    )
}

/// Schmidt data `C = g (Λ, 0) hᵀ`.
#[derive(Debug, Clone)]
pub struct SchmidtData {
    /// Left unitary, `2^ℓ × 2^ℓ`.
    pub g: ComplexMatrix,
    /// Right unitary, `2^m × 2^m`.
    pub h: ComplexMatrix,
    /// Singular values in descending order.
    pub lambdas: Vec<f64>,
}

impl SchmidtData {
    /// Rebuilds `g (Λ, 0) hᵀ`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let rows = self.g.nrows();
        let cols = self.h.nrows();
        let mut core = ComplexMatrix::zeros(rows, cols);
        for (i, &l) in self.lambdas.iter().enumerate() {
            core[(i, i)] = re(l);
        }
        &self.g * core * self.h.transpose()
    }
}

/// Orbit-type data of a state under the local group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitType {
    /// Number of distinct singular values (zero counts as one value).
    pub distinct: usize,
    /// Multiplicities in descending order of the singular values.
    pub multiplicities: Vec<usize>,
    /// Whether `CCᴴ` is singular; if so the last multiplicity counts zeros.
    pub singular: bool,
    /// Dimension of the vertical subspace (the orbit dimension).
    pub dim_vertical: usize,
    /// Dimension of the horizontal subspace.
    pub dim_horizontal: usize,
}

/// Two-qubit strata by singular-value pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stratum {
    /// Separable: `λ1 = 1, λ2 = 0`.
    M0,
    /// Principal: `λ1 > λ2 > 0`.
    M1,
    /// Maximally entangled: `λ1 = λ2`.
    M2,
}

impl std::fmt::Display for Stratum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stratum::M0 => "M0",
            Stratum::M1 => "M1",
            Stratum::M2 => "M2",
        };
        f.write_str(s)
    }
}

/// A tangent vector `X` at a base state.
#[derive(Debug, Clone)]
pub struct TangentVector {
    /// Base point.
    pub base: StateMatrix,
    /// Tangent direction, same shape as the base matrix.
    pub x: ComplexMatrix,
}

impl TangentVector {
    /// Pairs a direction with its base point after a shape check.
    pub fn new(base: &StateMatrix, x: ComplexMatrix) -> Result<Self> {
        if x.shape() != base.matrix().shape() {
            return Err(QctrlError::DimensionMismatch(format!(
                "tangent {:?} vs base {:?}",
                x.shape(),
                base.matrix().shape()
            )));
        }
        Ok(Self {
            base: base.clone(),
            x,
        })
    }

    /// `tr(XᴴC + CᴴX)`, which vanishes for vectors tangent to the sphere.
    pub fn tangency_defect(&self) -> f64 {
        2.0 * inner(&self.x, self.base.matrix())
    }

    /// Scales the direction.
    pub fn scaled(&self, s: C64) -> Self {
        Self {
            base: self.base.clone(),
            x: self.x.map(|z| z * s),
        }
    }
}

/// Real inner product `½ tr(XᴴY + YᴴX) = Re tr(XᴴY)`.
pub fn inner(x: &ComplexMatrix, y: &ComplexMatrix) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Reshapes a state vector into its state matrix.
pub fn iota(psi: &[C64], partition: BipartitePartition) -> Result<StateMatrix> {
    let (rows, cols) = (partition.rows(), partition.cols());
    if psi.len() != rows * cols {
        return Err(QctrlError::DimensionMismatch(format!(
            "state vector has length {}, partition needs {}",
            psi.len(),
            rows * cols
        )));
    }
    // index = A·2^m + B, with A the first ell bits and B the last m bits
    let c = ComplexMatrix::from_row_slice(rows, cols, psi);
    StateMatrix::new(partition, c)
}

/// Flattens a state matrix back into a state vector.
pub fn iota_inverse(state: &StateMatrix) -> Vec<C64> {
    crate::tensor::row_major(state.matrix())
}

/// Flattens any `2^ℓ × 2^m` matrix in the same order as [`iota_inverse`].
pub fn vectorize(c: &ComplexMatrix) -> DVector<C64> {
    DVector::from_vec(crate::tensor::row_major(c))
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &DVector<C64>, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(rows, cols, v.as_slice())
}

/// The entanglement measure `F(C) = det(I - CCᴴ)`, with roundoff negatives
/// clamped to zero.
pub fn measure_f(state: &StateMatrix) -> f64 {
    measure_f_matrix(state.matrix())
}

/// [`measure_f`] for a bare matrix.
pub fn measure_f_matrix(c: &ComplexMatrix) -> f64 {
    let rows = c.nrows();
    let m = ComplexMatrix::identity(rows, rows) - c * c.adjoint();
    let f = m.determinant().re;
    if f < 0.0 && f > -1e-10 {
        0.0
    } else {
        f
    }
}

/// Largest value of `F` for a row block of `ell` qubits, `(1 - 2^{-ℓ})^{2^ℓ}`.
pub fn max_measure_f(ell: usize) -> f64 {
    let d = (1usize << ell) as f64;
    (1.0 - 1.0 / d).powf(d)
}

/// Two-qubit concurrence `|det C|`, equal to `√F`.
pub fn concurrence(state: &StateMatrix) -> Result<f64> {
    state.partition().require_two_qubit()?;
    Ok(det2(state.matrix()).norm())
}

/// Determinant of a 2×2 matrix.
#[inline]
pub fn det2(c: &ComplexMatrix) -> C64 {
    c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)]
}

/// Applies the local transformation `C ↦ g C hᵀ`.
pub fn local_act(g: &ComplexMatrix, h: &ComplexMatrix, state: &StateMatrix) -> Result<StateMatrix> {
    let p = state.partition();
    if g.shape() != (p.rows(), p.rows()) || h.shape() != (p.cols(), p.cols()) {
        return Err(QctrlError::DimensionMismatch(format!(
            "local factors {:?}, {:?} do not match partition {}+{}",
            g.shape(),
            h.shape(),
            p.ell(),
            p.m()
        )));
    }
    for f in [g, h] {
        let deviation = unitarity_deviation(f);
        if deviation > 1e-10 {
            return Err(QctrlError::NotUnitary { deviation });
        }
    }
    Ok(StateMatrix::unchecked(
        p,
        g * state.matrix() * h.transpose(),
    ))
}

/// Schmidt (singular value) decomposition with descending singular values.
pub fn schmidt(state: &StateMatrix) -> Result<SchmidtData> {
    let c = state.matrix();
    let (rows, cols) = c.shape();
    let svd = c
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| QctrlError::Decomposition("SVD did not converge".into()))?;
    let u = svd
        .u
        .ok_or_else(|| QctrlError::Decomposition("SVD returned no left vectors".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| QctrlError::Decomposition("SVD returned no right vectors".into()))?;
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let lambdas: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut g = ComplexMatrix::zeros(rows, rows);
    // rows of Vᴴ, i.e. the conjugated right singular vectors
    let mut right_rows = ComplexMatrix::zeros(rows, cols);
    for (k, &i) in order.iter().enumerate() {
        g.set_column(k, &u.column(i));
        right_rows.set_row(k, &v_t.row(i));
    }
    // C = g Λ Vᴴ and C = g (Λ,0) hᵀ, so the first rows of hᵀ are those of Vᴴ
    let h_t = complete_rows(&right_rows, cols);
    Ok(SchmidtData {
        g,
        h: h_t.transpose(),
        lambdas,
    })
}

/// Extends a set of orthonormal rows to a full unitary by Gram–Schmidt
/// against the standard basis.
fn complete_rows(rows: &ComplexMatrix, dim: usize) -> ComplexMatrix {
    let mut basis: Vec<DVector<C64>> = (0..rows.nrows())
        .map(|r| rows.row(r).transpose().into_owned())
        .collect();
    for e in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::<C64>::zeros(dim);
        v[e] = re(1.0);
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / re(norm));
        }
    }
    let mut out = ComplexMatrix::zeros(dim, dim);
    for (r, b) in basis.iter().enumerate() {
        out.set_row(r, &b.transpose());
    }
    out
}

/// Singular values of the state matrix, descending.
pub fn singular_values(c: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = c.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orbit type from the singular-value pattern.
///
/// Singular values closer than `tol` are grouped; values not exceeding
/// `tol` count as zero. The vertical dimension is the dimension of the
/// local group `U(2^ℓ) ⊗ U(2^m)` (which is `2^{2ℓ} + 2^{2m} - 1`, the
/// scalar phases of the two factors being identified) minus the
/// dimension of the isotropy subgroup.
pub fn orbit_type(state: &StateMatrix, tol: f64) -> Result<OrbitType> {
    if tol <= 0.0 {
        return Err(QctrlError::InvalidArgument(
            "grouping tolerance must be positive".into(),
        ));
    }
    let p = state.partition();
    let lambdas = singular_values(state.matrix());
    let zeros = lambdas.iter().filter(|&&l| l <= tol).count();
    let positive: Vec<f64> = lambdas.iter().copied().filter(|&l| l > tol).collect();
    let mut multiplicities = Vec::new();
    let mut i = 0;
    while i < positive.len() {
        let mut j = i + 1;
        while j < positive.len() && positive[j - 1] - positive[j] <= tol {
            j += 1;
        }
        multiplicities.push(j - i);
        i = j;
    }
    let singular = zeros > 0;
    let rows = p.rows();
    let cols = p.cols();
    let tied: usize = multiplicities.iter().map(|k| k * k).sum();
    // isotropy inside U(2^ℓ) × U(2^m); the free column block grows by the
    // zero rows when C is singular
    let free_cols = cols - rows + zeros;
    let product_isotropy = tied + zeros * zeros + free_cols * free_cols;
    if singular {
        multiplicities.push(zeros);
    }
    let group_dim = rows * rows + cols * cols - 1;
    let isotropy = product_isotropy - 1;
    let dim_vertical = group_dim - isotropy;
    let tangent_dim = 2 * rows * cols - 1;
    Ok(OrbitType {
        distinct: multiplicities.len(),
        multiplicities,
        singular,
        dim_vertical,
        dim_horizontal: tangent_dim - dim_vertical,
    })
}

/// Classifies a two-qubit state into `M0`, `M1` or `M2`.
pub fn classify_stratum(state: &StateMatrix, tol: f64) -> Result<Stratum> {
    state.partition().require_two_qubit()?;
    let l = singular_values(state.matrix());
    Ok(stratum_from_lambdas(l[0], l[1], tol))
}

/// Stratum label from sorted two-qubit singular values.
pub fn stratum_from_lambdas(lambda1: f64, lambda2: f64, tol: f64) -> Stratum {
    if lambda2 <= tol {
        Stratum::M0
    } else if lambda1 - lambda2 <= tol {
        Stratum::M2
    } else {
        Stratum::M1
    }
}

/// Linear vector field `X_{A⊗B}(C) = A C Bᵀ`.
pub fn tensor_field(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> ComplexMatrix {
    a * c * b.transpose()
}

/// Fundamental vector `ξC + Cηᵀ` of the local group action.
pub fn fundamental_vector(
    xi: &ComplexMatrix,
    eta: &ComplexMatrix,
    state: &StateMatrix,
) -> Result<TangentVector> {
    let p = state.partition();
    if xi.shape() != (p.rows(), p.rows()) || eta.shape() != (p.cols(), p.cols()) {
        return Err(QctrlError::DimensionMismatch(format!(
            "generators {:?}, {:?} do not match partition {}+{}",
            xi.shape(),
            eta.shape(),
            p.ell(),
            p.m()
        )));
    }
    for g in [xi, eta] {
        let deviation = skew_hermitian_deviation(g);
        if deviation > 1e-10 {
            return Err(QctrlError::NotSkewHermitian { deviation });
        }
    }
    let c = state.matrix();
    TangentVector::new(state, xi * c + c * eta.transpose())
}

/// Whether `XCᴴ - CXᴴ` and `CᴴX - XᴴC` both vanish within `tol`.
pub fn is_horizontal(v: &TangentVector, tol: f64) -> bool {
    let (c, x) = (v.base.matrix(), &v.x);
    let left = x * c.adjoint() - c * x.adjoint();
    let right = c.adjoint() * x - x.adjoint() * c;
    frobenius(&left) <= tol && frobenius(&right) <= tol
}

/// Orthonormal basis of the skew-Hermitian matrices `u(d)` under the real
/// inner product.
pub fn unitary_algebra_basis(d: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(j, j)] = I;
        out.push(m);
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut sym = ComplexMatrix::zeros(d, d);
            sym[(j, k)] = C64::new(0.0, s);
            sym[(k, j)] = C64::new(0.0, s);
            out.push(sym);
            let mut anti = ComplexMatrix::zeros(d, d);
            anti[(j, k)] = re(s);
            anti[(k, j)] = re(-s);
            out.push(anti);
        }
    }
    out
}

/// All fundamental vectors at `C` generated by the basis of
/// `u(2^ℓ) ⊕ u(2^m)`; an overcomplete spanning set of the vertical space.
pub fn fundamental_generators(state: &StateMatrix) -> Vec<ComplexMatrix> {
    let p = state.partition();
    let c = state.matrix();
    let mut out: Vec<ComplexMatrix> = unitary_algebra_basis(p.rows())
        .into_iter()
        .map(|xi| xi * c)
        .collect();
    out.extend(
        unitary_algebra_basis(p.cols())
            .into_iter()
            .map(|eta| c * eta.transpose()),
    );
    out
}

/// Numerical rank of the Gram matrix of `vectors`.
pub fn span_rank(vectors: &[ComplexMatrix]) -> usize {
    let gram = gram_matrix(vectors);
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    eig.eigenvalues
        .iter()
        .filter(|&&e| e > PINV_CUTOFF * max)
        .count()
}

fn gram_matrix(vectors: &[ComplexMatrix]) -> DMatrix<f64> {
    let k = vectors.len();
    DMatrix::from_fn(k, k, |i, j| inner(&vectors[i], &vectors[j]))
}

/// Least-squares coefficients of `x` over `vectors` (minimum-norm solution
/// through a Gram pseudo-inverse with relative cutoff [`PINV_CUTOFF`]).
pub fn least_squares_coefficients(vectors: &[ComplexMatrix], x: &ComplexMatrix) -> Vec<f64> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let gram = gram_matrix(vectors);
    let rhs = DVector::from_fn(vectors.len(), |i, _| inner(&vectors[i], x));
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let q = &eig.eigenvectors;
    let qt_rhs = q.transpose() * rhs;
    let mut scaled = DVector::zeros(vectors.len());
    for (i, &e) in eig.eigenvalues.iter().enumerate() {
        if max > 0.0 && e > PINV_CUTOFF * max {
            scaled[i] = qt_rhs[i] / e;
        }
    }
    (q * scaled).iter().copied().collect()
}

/// Linear combination `Σ c_i v_i`.
pub fn combine(vectors: &[ComplexMatrix], coeffs: &[f64]) -> ComplexMatrix {
    let (r, c) = vectors[0].shape();
    let mut out = ComplexMatrix::zeros(r, c);
    for (v, &k) in vectors.iter().zip(coeffs) {
        out += v.map(|z| z * k);
    }
    out
}

/// Splits a tangent vector into vertical and horizontal parts by orthogonal
/// projection onto the span of the fundamental vectors.
pub fn split_vertical_horizontal(v: &TangentVector) -> (TangentVector, TangentVector) {
    let gens = fundamental_generators(&v.base);
    let coeffs = least_squares_coefficients(&gens, &v.x);
    let vertical = combine(&gens, &coeffs);
    let horizontal = &v.x - &vertical;
    (
        TangentVector {
            base: v.base.clone(),
            x: vertical,
        },
        TangentVector {
            base: v.base.clone(),
            x: horizontal,
        },
    )
}

/// `X_{iσ_j⊗σ_k}(C) = i σ_j C σ_kᵀ` for the two-qubit partition, with index
/// 0 standing for the identity factor.
pub fn pauli_field(j: u8, k: u8, c: &ComplexMatrix) -> Result<ComplexMatrix> {
    let a = pauli(PauliIndex::new(j)?).map(|z| I * z);
    let b = pauli(PauliIndex::new(k)?);
    Ok(tensor_field(&a, &b, c))
}

fn require_diagonal_two_qubit(lambda: &StateMatrix) -> Result<(f64, f64)> {
    lambda.partition().require_two_qubit()?;
    let c = lambda.matrix();
    let off = c[(0, 1)].norm() + c[(1, 0)].norm();
    let (l1, l2) = (c[(0, 0)], c[(1, 1)]);
    if off > 1e-12
        || l1.im.abs() > 1e-12
        || l2.im.abs() > 1e-12
        || l1.re < l2.re - 1e-12
        || l2.re < -1e-12
    {
        return Err(QctrlError::InvalidArgument(
            "expected a real diagonal state diag(λ1, λ2) with λ1 ≥ λ2 ≥ 0".into(),
        ));
    }
    Ok((l1.re, l2.re))
}

fn tangent_list(
    lambda: &StateMatrix,
    pairs: &[(u8, u8)],
    factor: C64,
) -> Result<Vec<TangentVector>> {
    pairs
        .iter()
        .map(|&(j, k)| {
            let x = pauli_field(j, k, lambda.matrix())?.map(|z| z * factor);
            TangentVector::new(lambda, x)
        })
        .collect()
}

/// Basis of the vertical space at a sorted real diagonal two-qubit state,
/// chosen per stratum (6, 5 or 4 vectors).
pub fn vertical_basis(lambda: &StateMatrix, tol: f64) -> Result<Vec<TangentVector>> {
    let (l1, l2) = require_diagonal_two_qubit(lambda)?;
    let pairs: &[(u8, u8)] = match stratum_from_lambdas(l1, l2, tol) {
        Stratum::M1 => &[(0, 0), (3, 0), (1, 0), (0, 1), (2, 0), (0, 2)],
        Stratum::M0 => &[(0, 0), (1, 0), (0, 1), (2, 0), (0, 2)],
        Stratum::M2 => &[(0, 0), (3, 0), (1, 0), (2, 0)],
    };
    tangent_list(lambda, pairs, re(1.0))
}

/// Basis of the horizontal space at a sorted real diagonal two-qubit state,
/// chosen per stratum (1, 2 or 3 vectors).
pub fn horizontal_basis(lambda: &StateMatrix, tol: f64) -> Result<Vec<TangentVector>> {
    let (l1, l2) = require_diagonal_two_qubit(lambda)?;
    match stratum_from_lambdas(l1, l2, tol) {
        Stratum::M1 => tangent_list(lambda, &[(1, 2)], re(1.0)),
        Stratum::M0 => tangent_list(lambda, &[(1, 1), (1, 2)], re(1.0)),
        Stratum::M2 => tangent_list(lambda, &[(1, 0), (2, 0), (3, 0)], I),
    }
}
