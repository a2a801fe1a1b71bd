//! Tensor-product bracket, realization map and linear vector fields.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QctrlError, Result};
use crate::state::{BipartitePartition, StateMatrix, TangentVector};
use crate::tensor::{commutator, frobenius, kron, pauli_raw, ComplexMatrix, C64, I};

/// A scaled tensor product `coeff · A⊗B`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTerm {
    /// Scalar prefactor.
    pub coeff: C64,
    /// Row-block factor, `2^ℓ × 2^ℓ`.
    pub a: ComplexMatrix,
    /// Column-block factor, `2^m × 2^m`.
    pub b: ComplexMatrix,
}

impl TensorTerm {
    /// Builds `coeff · A⊗B`.
    pub fn new(coeff: C64, a: ComplexMatrix, b: ComplexMatrix) -> Self {
        Self { coeff, a, b }
    }

    /// `i σ_j ⊗ σ_k` on two qubits (index 0 is the identity factor).
    pub fn pauli(j: u8, k: u8) -> Result<Self> {
        Ok(Self::new(I, pauli_raw(j)?, pauli_raw(k)?))
    }

    /// Dense realization `coeff · kron(A, B)`.
    pub fn realize(&self) -> ComplexMatrix {
        kron(&self.a, &self.b).map(|z| z * self.coeff)
    }

    fn partition(&self) -> Result<BipartitePartition> {
        let (ra, ca) = self.a.shape();
        let (rb, cb) = self.b.shape();
        if ra != ca || rb != cb {
            return Err(QctrlError::DimensionMismatch(
                "tensor factors must be square".into(),
            ));
        }
        crate::state::partition_for_shape(ra, rb)
    }
}

/// A canonicalized sum of tensor terms over a fixed partition.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSum {
    partition: BipartitePartition,
    terms: Vec<TensorTerm>,
}

/// Terms whose realization has Frobenius norm below this are dropped.
const ZERO_TERM_TOL: f64 = 1e-14;

impl OperatorSum {
    /// The empty (zero) sum.
    pub fn zero(partition: BipartitePartition) -> Self {
        Self {
            partition,
            terms: Vec::new(),
        }
    }

    /// Builds a canonical sum from terms, which must share a partition.
    pub fn from_terms(partition: BipartitePartition, terms: Vec<TensorTerm>) -> Result<Self> {
        let mut out = Self::zero(partition);
        for t in terms {
            out.push(t)?;
        }
        Ok(out)
    }

    /// Single-term sum.
    pub fn single(term: TensorTerm) -> Result<Self> {
        let p = term.partition()?;
        Self::from_terms(p, vec![term])
    }

    /// `i σ_j ⊗ σ_k` as a two-qubit sum.
    pub fn pauli(j: u8, k: u8) -> Result<Self> {
        Self::single(TensorTerm::pauli(j, k)?)
    }

    /// The partition.
    pub fn partition(&self) -> BipartitePartition {
        self.partition
    }

    /// Canonical terms.
    pub fn terms(&self) -> &[TensorTerm] {
        &self.terms
    }

    /// Whether the sum is identically zero.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds a term, merging it into an existing term whose realization is
    /// proportional, and dropping terms that cancel.
    pub fn push(&mut self, term: TensorTerm) -> Result<()> {
        if term.partition()? != self.partition {
            return Err(QctrlError::DimensionMismatch(
                "tensor term does not match the partition of the sum".into(),
            ));
        }
        let dense = term.realize();
        if frobenius(&dense) < ZERO_TERM_TOL {
            return Ok(());
        }
        for idx in 0..self.terms.len() {
            let base = kron(&self.terms[idx].a, &self.terms[idx].b);
            let norm2 = frobenius(&base).powi(2);
            let ratio = base.dotc(&dense) / norm2;
            if frobenius(&(&dense - base.map(|z| z * ratio))) <= 1e-12 * frobenius(&dense) {
                self.terms[idx].coeff += ratio;
                if self.terms[idx].coeff.norm() * norm2.sqrt() < ZERO_TERM_TOL {
                    self.terms.remove(idx);
                }
                return Ok(());
            }
        }
        self.terms.push(term);
        Ok(())
    }

    /// Sum of two operator sums.
    pub fn add(&self, other: &OperatorSum) -> Result<OperatorSum> {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(t.clone())?;
        }
        Ok(out)
    }

    /// Scales every coefficient.
    pub fn scale(&self, s: C64) -> OperatorSum {
        OperatorSum {
            partition: self.partition,
            terms: self
                .terms
                .iter()
                .map(|t| TensorTerm::new(t.coeff * s, t.a.clone(), t.b.clone()))
                .collect(),
        }
    }

    fn require_same_partition(&self, other: &OperatorSum) -> Result<()> {
        if self.partition == other.partition {
            Ok(())
        } else {
            Err(QctrlError::DimensionMismatch(
                "operator sums live on different partitions".into(),
            ))
        }
    }
}

/// The tensor bracket
/// `[A1⊗B1, A2⊗B2] = [A1, A2]⊗B1B2 + A2A1⊗[B1, B2]`, extended bilinearly.
pub fn tensor_bracket(s1: &OperatorSum, s2: &OperatorSum) -> Result<OperatorSum> {
    s1.require_same_partition(s2)?;
    let mut out = OperatorSum::zero(s1.partition);
    for t1 in &s1.terms {
        for t2 in &s2.terms {
            let c = t1.coeff * t2.coeff;
            out.push(TensorTerm::new(c, commutator(&t1.a, &t2.a), &t1.b * &t2.b))?;
            out.push(TensorTerm::new(c, &t2.a * &t1.a, commutator(&t1.b, &t2.b)))?;
        }
    }
    Ok(out)
}

/// Realization `f(Σ c A⊗B) = Σ c kron(A, B)`.
pub fn f_map(s: &OperatorSum) -> ComplexMatrix {
    let dim = s.partition.rows() * s.partition.cols();
    s.terms
        .iter()
        .fold(ComplexMatrix::zeros(dim, dim), |acc, t| acc + t.realize())
}

/// Applies the linear field of `s` to a bare matrix: `Σ c A C Bᵀ`.
pub fn apply_field_matrix(s: &OperatorSum, c: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(c.nrows(), c.ncols());
    for t in &s.terms {
        out += (&t.a * c * t.b.transpose()).map(|z| z * t.coeff);
    }
    out
}

/// Evaluates the linear vector field `X_s` at a state.
pub fn apply_field(s: &OperatorSum, state: &StateMatrix) -> Result<TangentVector> {
    if s.partition != state.partition() {
        return Err(QctrlError::DimensionMismatch(
            "operator sum and state use different partitions".into(),
        ));
    }
    TangentVector::new(state, apply_field_matrix(s, state.matrix()))
}

/// The operator sum whose field is the vector-field bracket
/// `[X_{s1}, X_{s2}] = -X_{[s1, s2]}`.
pub fn field_bracket(s1: &OperatorSum, s2: &OperatorSum) -> Result<OperatorSum> {
    Ok(tensor_bracket(s1, s2)?.scale(C64::new(-1.0, 0.0)))
}

/// Label of the two-qubit field `X_{iσ_j⊗σ_k}`; index 0 is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldLabel {
    /// Row-qubit Pauli index.
    pub j: u8,
    /// Column-qubit Pauli index.
    pub k: u8,
}

impl FieldLabel {
    /// Creates a label.
    pub const fn new(j: u8, k: u8) -> Self {
        Self { j, k }
    }

    /// The operator sum `iσ_j⊗σ_k`.
    pub fn operator(&self) -> Result<OperatorSum> {
        OperatorSum::pauli(self.j, self.k)
    }
}

impl fmt::Display for FieldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |j: u8| match j {
            0 => "I".to_string(),
            j => format!("σ{j}"),
        };
        write!(f, "X_{{i{}⊗{}}}", name(self.j), name(self.k))
    }
}

/// A field label with a sign, or zero.
///
/// Bracket results are positive multiples of a signed basis field; the
/// multiple is kept in `magnitude` and left out of the symbolic display.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLabel {
    /// `+1`, `-1`, or `0` for the zero field.
    pub sign: i8,
    /// The matched label; `None` for zero.
    pub label: Option<FieldLabel>,
    /// Positive factor relating the result to the signed basis field.
    pub magnitude: f64,
}

impl fmt::Display for SignedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.sign, self.label) {
            (_, None) | (0, _) => f.write_str("0"),
            (s, Some(l)) if s < 0 => write!(f, "-{l}"),
            (_, Some(l)) => write!(f, "{l}"),
        }
    }
}

/// Matches a two-qubit operator sum against a positive multiple of
/// `±iσ_j⊗σ_k`, or zero, by projecting its realization onto each basis
/// field.
pub fn identify(s: &OperatorSum) -> Result<SignedLabel> {
    let dense = f_map(s);
    let scale = frobenius(&dense);
    if scale < 1e-12 {
        return Ok(SignedLabel {
            sign: 0,
            label: None,
            magnitude: 0.0,
        });
    }
    for j in 0..4u8 {
        for k in 0..4u8 {
            let label = FieldLabel::new(j, k);
            let basis = f_map(&label.operator()?);
            let coeff = basis.dotc(&dense).re / basis.norm_squared();
            let residual = frobenius(&(&dense - basis.map(|z| z * coeff)));
            if coeff.abs() > 1e-12 && residual < 1e-12 * scale.max(1.0) {
                return Ok(SignedLabel {
                    sign: if coeff > 0.0 { 1 } else { -1 },
                    label: Some(label),
                    magnitude: coeff.abs(),
                });
            }
        }
    }
    Err(QctrlError::UnmatchedBracket(format!(
        "{} tensor terms, realization norm {scale:.3e}",
        s.terms().len()
    )))
}

/// One line of the two-qubit bracket table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketRow {
    /// Outer field of a double bracket, `None` for a single bracket.
    pub outer: Option<FieldLabel>,
    /// Left field of the inner bracket.
    pub left: FieldLabel,
    /// Right field of the inner bracket.
    pub right: FieldLabel,
    /// Identified result.
    pub result: SignedLabel,
}

impl fmt::Display for BracketRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.outer {
            None => write!(f, "[{}, {}] = {}", self.left, self.right, self.result),
            Some(o) => write!(
                f,
                "[{}, [{}, {}]] = {}",
                o, self.left, self.right, self.result
            ),
        }
    }
}

const DRIFT: FieldLabel = FieldLabel::new(3, 3);
const CONTROLS: [FieldLabel; 4] = [
    FieldLabel::new(1, 0),
    FieldLabel::new(2, 0),
    FieldLabel::new(0, 1),
    FieldLabel::new(0, 2),
];

/// Computes every single bracket among the drift field `X_{iσ3⊗σ3}` and
/// the four control fields, and the twenty double brackets
/// `[Y, [X_{iσ3⊗σ3}, Z]]` with `Y` the drift or a control field and `Z` a
/// control field, identifying each result as `±X_{iσ_j⊗σ_k}` or zero.
pub fn appendix_a_table() -> Result<Vec<BracketRow>> {
    let mut pairs = Vec::new();
    for c in CONTROLS {
        pairs.push((DRIFT, c));
    }
    for (a, b) in [(0, 1), (2, 3), (0, 2), (0, 3), (1, 2), (1, 3)] {
        pairs.push((CONTROLS[a], CONTROLS[b]));
    }
    let mut rows = Vec::new();
    for (left, right) in pairs {
        let s = field_bracket(&left.operator()?, &right.operator()?)?;
        rows.push(BracketRow {
            outer: None,
            left,
            right,
            result: identify(&s)?,
        });
    }
    let outers: Vec<FieldLabel> = std::iter::once(DRIFT).chain(CONTROLS).collect();
    for outer in outers {
        for right in CONTROLS {
            let inner = field_bracket(&DRIFT.operator()?, &right.operator()?)?;
            let s = field_bracket(&outer.operator()?, &inner)?;
            rows.push(BracketRow {
                outer: Some(outer),
                left: DRIFT,
                right,
                result: identify(&s)?,
            });
        }
    }
    Ok(rows)
}

/// Renders the table as text, one row per line.
pub fn render_table(rows: &[BracketRow]) -> String {
    rows.iter().map(|r| format!("{r}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::re;

    fn op(j: u8, k: u8) -> OperatorSum {
        OperatorSum::pauli(j, k).unwrap()
    }

    #[test]
    fn drift_control_bracket_matches_first_table_row() {
        let s = field_bracket(&op(3, 3), &op(1, 0)).unwrap();
        let id = identify(&s).unwrap();
        assert_eq!(id.sign, -1);
        assert_eq!(id.label, Some(FieldLabel::new(2, 3)));
    }

    #[test]
    fn commuting_controls_vanish() {
        let s = field_bracket(&op(1, 0), &op(0, 2)).unwrap();
        assert!(f_map(&s).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn self_bracket_field_vanishes() {
        let t = TensorTerm::new(re(0.7), pauli_raw(1).unwrap(), pauli_raw(2).unwrap());
        let s = OperatorSum::single(t).unwrap();
        let b = tensor_bracket(&s, &s).unwrap();
        let c = ComplexMatrix::from_element(2, 2, re(0.5));
        assert!(frobenius(&apply_field_matrix(&b, &c)) < 1e-15);
    }

    #[test]
    fn realization_examples() {
        let id = OperatorSum::single(TensorTerm::new(
            re(1.0),
            ComplexMatrix::identity(2, 2),
            ComplexMatrix::identity(2, 2),
        ))
        .unwrap();
        assert_eq!(f_map(&id), ComplexMatrix::identity(4, 4));
        let z = f_map(&op(3, 3));
        let want = kron(&pauli_raw(3).unwrap(), &pauli_raw(3).unwrap()).map(|x| I * x);
        assert!(frobenius(&(z - want)) < 1e-15);
    }

    #[test]
    fn apply_field_examples() {
        let c = ComplexMatrix::from_row_slice(2, 2, &[re(0.8), re(0.0), re(0.0), re(0.6)]);
        let x = apply_field_matrix(&op(3, 3), &c);
        assert!((x[(0, 0)] - C64::new(0.0, 0.2)).norm() < 1e-15);
        assert!((x[(1, 1)] - C64::new(0.0, 0.15)).norm() < 1e-15);
    }

    #[test]
    fn canonicalization_merges_proportional_terms() {
        let p = BipartitePartition::two_qubit();
        let a = pauli_raw(1).unwrap();
        let b = pauli_raw(3).unwrap();
        let s = OperatorSum::from_terms(
            p,
            vec![
                TensorTerm::new(re(1.0), a.clone(), b.clone()),
                TensorTerm::new(re(2.0), a.map(|z| z * 0.5), b.map(|z| z * 2.0)),
            ],
        )
        .unwrap();
        assert_eq!(s.terms().len(), 1);
        assert!((s.terms()[0].coeff - re(3.0)).norm() < 1e-14);
        let cancel = s.add(&s.scale(re(-1.0))).unwrap();
        assert!(cancel.is_zero());
    }

    #[test]
    fn partition_mismatch_is_rejected() {
        let small = op(1, 0);
        let big = OperatorSum::single(TensorTerm::new(
            re(1.0),
            ComplexMatrix::identity(2, 2),
            ComplexMatrix::identity(4, 4),
        ))
        .unwrap();
        assert!(tensor_bracket(&small, &big).is_err());
    }

    #[test]
    fn table_has_all_rows() {
        let rows = appendix_a_table().unwrap();
        assert_eq!(rows.len(), 30);
        assert_eq!(rows.iter().filter(|r| r.outer.is_some()).count(), 20);
        assert_eq!(rows[..10].iter().filter(|r| r.result.sign == 0).count(), 4);
    }

    #[test]
    fn only_double_drift_brackets_pick_up_a_quarter() {
        let rows = appendix_a_table().unwrap();
        for r in rows.iter().filter(|r| r.result.sign != 0) {
            let want = if r.outer == Some(DRIFT) { 0.25 } else { 1.0 };
            assert!((r.result.magnitude - want).abs() < 1e-12, "{r}");
        }
    }
}
