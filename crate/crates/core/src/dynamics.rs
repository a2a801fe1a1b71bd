//! NMR Hamiltonians, their vector fields on state matrices, and solvers.
//!
//! The drift Hamiltonian is `Ĥ_d = Σ_{α<β} J_{αβ} σ3^{(α)} σ3^{(β)}` and the
//! control enters through per-qubit generators `ξ_α = i x_α σ1 + i y_α σ2`.
//! On a bipartite state matrix the equation of motion reads
//!
//! ```text
//! dC/dt = -i Σ_k ε_k Σ1^{(k)} C Σ2^{(k)ᵀ} + ξ1 C + C ξ2ᵀ
//! ```
//!
//! where `ξ1` (respectively `ξ2`) is the sum of the embedded per-qubit
//! generators of the row (respectively column) block. Row qubits carry the
//! Hamiltonian amplitudes `v = -(x, y)`. Column qubits act through the
//! transpose, and `σ2ᵀ = -σ2` flips the second amplitude to `v = (-x, y)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{QctrlError, Result};
use crate::lie::{OperatorSum, TensorTerm};
use crate::state::{
    classify_stratum, iota_inverse, measure_f_matrix, orbit_type, singular_values, unvectorize,
    vectorize, BipartitePartition, StateMatrix, SINGULAR_VALUE_TOL,
};
use crate::tensor::{
    embed_operator, expm, frobenius, hermitian_deviation, kron, pauli, pauli_raw,
    skew_hermitian_deviation, ComplexMatrix, PauliIndex, C64, I,
};

/// Largest register handled by the dense solvers.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Tolerance on `|tr(CᴴC) - 1|` for samples stored in a trajectory.
pub const TRAJECTORY_NORM_TOL: f64 = 1e-8;

/// Drift in `|tr(CᴴC) - 1|` above which the oracle renormalizes a step.
pub const RENORMALIZE_TOL: f64 = 1e-12;

/// Default quadrature density of the series solvers.
pub const DEFAULT_NODES_PER_UNIT_TIME: usize = 512;

/// Default total degree of the general series solver.
pub const DEFAULT_SERIES_ORDER: usize = 3;

/// Default truncation order of the two-qubit series in `J`.
pub const DEFAULT_TWO_QUBIT_ORDER: usize = 4;

/// Upper bound on oracle steps in one call.
const MAX_ORACLE_STEPS: usize = 500_000_000;

/// Qubit register with symmetric `σ3σ3` couplings.
///
/// Sites are numbered from 1. Only nonzero couplings are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinGraph {
    n: usize,
    couplings: BTreeMap<(usize, usize), f64>,
}

impl SpinGraph {
    /// A graph on `n` qubits with no couplings.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 16 {
            return Err(QctrlError::InvalidArgument(format!(
                "qubit count must be in 1..=16, got {n}"
            )));
        }
        Ok(Self {
            n,
            couplings: BTreeMap::new(),
        })
    }

    /// Builds a graph from `(α, β, J_{αβ})` triples.
    pub fn with_couplings(
        n: usize,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut g = Self::new(n)?;
        for (a, b, j) in couplings {
            g.set(a, b, j)?;
        }
        Ok(g)
    }

    /// Two qubits coupled with strength `j`.
    pub fn two_qubit(j: f64) -> Result<Self> {
        Self::with_couplings(2, [(1, 2, j)])
    }

    /// Sets `J_{αβ}`; a zero value removes the edge.
    pub fn set(&mut self, alpha: usize, beta: usize, j: f64) -> Result<()> {
        for s in [alpha, beta] {
            if s == 0 || s > self.n {
                return Err(QctrlError::SiteOutOfRange {
                    site: s,
                    qubits: self.n,
                });
            }
        }
        if alpha == beta {
            return Err(QctrlError::InvalidArgument(format!(
                "self-coupling J_{{{alpha}{alpha}}} is not allowed"
            )));
        }
        if !j.is_finite() {
            return Err(QctrlError::NonFinite(format!(
                "coupling J_{{{alpha},{beta}}}"
            )));
        }
        let key = (alpha.min(beta), alpha.max(beta));
        if j == 0.0 {
            self.couplings.remove(&key);
        } else {
            self.couplings.insert(key, j);
        }
        Ok(())
    }

    /// Number of qubits.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `J_{αβ}` (zero when absent), in either index order.
    pub fn coupling(&self, alpha: usize, beta: usize) -> f64 {
        let key = (alpha.min(beta), alpha.max(beta));
        self.couplings.get(&key).copied().unwrap_or(0.0)
    }

    /// Nonzero couplings as `(α, β, J)` with `α < β`.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.couplings.iter().map(|(&(a, b), &j)| (a, b, j))
    }

    /// Whether the graph has no edges.
    pub fn is_uncoupled(&self) -> bool {
        self.couplings.is_empty()
    }

    /// The same edge set with every coupling multiplied by `factor(α, β)`.
    pub fn rescaled(&self, mut factor: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::with_couplings(
            self.n,
            self.couplings().map(|(a, b, j)| (a, b, j * factor(a, b))),
        )
    }
}

/// Amplitudes `(x, y)` of the per-qubit generator `ξ = i x σ1 + i y σ2`.
///
/// A row-side qubit acts on the state matrix as `C ↦ ξC`, a column-side
/// qubit as `C ↦ Cξ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QubitControl {
    /// Coefficient of `iσ1`.
    pub x: f64,
    /// Coefficient of `iσ2`.
    pub y: f64,
}

impl QubitControl {
    /// Creates a control.
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// The generator `i x σ1 + i y σ2`.
    pub fn generator(&self) -> ComplexMatrix {
        (pauli(PauliIndex::X) * C64::new(0.0, self.x))
            + (pauli(PauliIndex::Y) * C64::new(0.0, self.y))
    }

    /// Whether both amplitudes vanish.
    pub fn is_zero(&self) -> bool {
        self.x == 0.0 && self.y == 0.0
    }
}

/// One constant-control interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    /// Length of the interval.
    pub duration: f64,
    /// One control per qubit, site 1 first.
    pub controls: Vec<QubitControl>,
}

/// Piecewise-constant control schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    segments: Vec<ControlSegment>,
}

impl ControlSchedule {
    /// Validates durations and control counts against `n` qubits.
    pub fn new(segments: Vec<ControlSegment>, n: usize) -> Result<Self> {
        for (k, s) in segments.iter().enumerate() {
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(QctrlError::InvalidArgument(format!(
                    "segment {k} has non-positive duration {}",
                    s.duration
                )));
            }
            if s.controls.len() != n {
                return Err(QctrlError::DimensionMismatch(format!(
                    "segment {k} lists {} controls for {n} qubits",
                    s.controls.len()
                )));
            }
            if s.controls
                .iter()
                .any(|c| !(c.x.is_finite() && c.y.is_finite()))
            {
                return Err(QctrlError::NonFinite(format!("controls of segment {k}")));
            }
        }
        Ok(Self { segments })
    }

    /// A single segment with constant controls.
    pub fn constant(duration: f64, controls: Vec<QubitControl>) -> Result<Self> {
        let n = controls.len();
        Self::new(vec![ControlSegment { duration, controls }], n)
    }

    /// A single uncontrolled segment on `n` qubits.
    pub fn free(duration: f64, n: usize) -> Result<Self> {
        Self::constant(duration, vec![QubitControl::default(); n])
    }

    /// The segments in time order.
    pub fn segments(&self) -> &[ControlSegment] {
        &self.segments
    }

    /// Total duration.
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

/// One term `ε · Σ1 ⊗ Σ2` of a factorized drift.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftTerm {
    /// Small real parameter.
    pub epsilon: f64,
    /// Hermitian row-block factor.
    pub sigma1: ComplexMatrix,
    /// Hermitian column-block factor.
    pub sigma2: ComplexMatrix,
}

/// Drift field `C ↦ -i Σ_k ε_k Σ1^{(k)} C Σ2^{(k)ᵀ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftFactorization {
    partition: BipartitePartition,
    terms: Vec<DriftTerm>,
}

impl DriftFactorization {
    /// Validates shapes, finiteness and hermiticity (within 1e-12).
    pub fn new(partition: BipartitePartition, terms: Vec<DriftTerm>) -> Result<Self> {
        for (k, t) in terms.iter().enumerate() {
            if t.sigma1.shape() != (partition.rows(), partition.rows())
                || t.sigma2.shape() != (partition.cols(), partition.cols())
            {
                return Err(QctrlError::DimensionMismatch(format!(
                    "drift term {k} has factors {:?} and {:?}",
                    t.sigma1.shape(),
                    t.sigma2.shape()
                )));
            }
            if !t.epsilon.is_finite() {
                return Err(QctrlError::NonFinite(format!("drift parameter {k}")));
            }
            let deviation = hermitian_deviation(&t.sigma1).max(hermitian_deviation(&t.sigma2));
            if deviation > 1e-12 {
                return Err(QctrlError::InvalidArgument(format!(
                    "drift term {k} is not Hermitian (deviation {deviation:.2e})"
                )));
            }
        }
        Ok(Self { partition, terms })
    }

    /// One term per coupling of `graph`, with `ε = J_{αβ}`.
    pub fn from_graph(graph: &SpinGraph, partition: BipartitePartition) -> Result<Self> {
        require_graph_partition(graph, partition)?;
        let (ell, m) = (partition.ell(), partition.m());
        let z = pauli(PauliIndex::Z);
        let id = |d: usize| ComplexMatrix::identity(d, d);
        let mut terms = Vec::new();
        for (a, b, j) in graph.couplings() {
            let (sigma1, sigma2) = if b <= ell {
                (
                    embed_operator(&z, a, ell)? * embed_operator(&z, b, ell)?,
                    id(partition.cols()),
                )
            } else if a > ell {
                (
                    id(partition.rows()),
                    embed_operator(&z, a - ell, m)? * embed_operator(&z, b - ell, m)?,
                )
            } else {
                (embed_operator(&z, a, ell)?, embed_operator(&z, b - ell, m)?)
            };
            terms.push(DriftTerm {
                epsilon: j,
                sigma1,
                sigma2,
            });
        }
        Self::new(partition, terms)
    }

    /// The partition.
    pub fn partition(&self) -> BipartitePartition {
        self.partition
    }

    /// The terms.
    pub fn terms(&self) -> &[DriftTerm] {
        &self.terms
    }

    /// Evaluates the drift field at a bare matrix.
    pub fn apply(&self, c: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(c.nrows(), c.ncols());
        for t in &self.terms {
            out += (&t.sigma1 * c * t.sigma2.transpose()) * C64::new(0.0, -t.epsilon);
        }
        out
    }

    /// The drift field as an operator sum `Σ (-iε) Σ1⊗Σ2`.
    pub fn operator_sum(&self) -> Result<OperatorSum> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                TensorTerm::new(
                    C64::new(0.0, -t.epsilon),
                    t.sigma1.clone(),
                    t.sigma2.clone(),
                )
            })
            .collect();
        OperatorSum::from_terms(self.partition, terms)
    }

    /// Dense Hamiltonian `Σ ε Σ1 ⊗ Σ2` on the flattened state vector.
    pub fn hamiltonian(&self) -> ComplexMatrix {
        let dim = self.partition.rows() * self.partition.cols();
        self.terms
            .iter()
            .fold(ComplexMatrix::zeros(dim, dim), |acc, t| {
                acc + kron(&t.sigma1, &t.sigma2) * C64::from(t.epsilon)
            })
    }

    /// Upper bound on the operator norm of the drift generator.
    pub fn norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.epsilon.abs() * frobenius(&t.sigma1) * frobenius(&t.sigma2))
            .sum()
    }
}

fn require_graph_partition(graph: &SpinGraph, partition: BipartitePartition) -> Result<()> {
    if graph.n() != partition.n() {
        return Err(QctrlError::DimensionMismatch(format!(
            "graph has {} qubits, partition {}+{}",
            graph.n(),
            partition.ell(),
            partition.m()
        )));
    }
    Ok(())
}

/// The control generators `ξ1` (row block) and `ξ2` (column block) of a
/// constant-control segment, entering the equation of motion as
/// `ξ1 C + C ξ2ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalControls {
    /// `Σ_{α ≤ ℓ} I⊗…⊗ξ_α⊗…⊗I`.
    pub xi1: ComplexMatrix,
    /// `(Σ_{β > ℓ} I⊗…⊗ξ_β⊗…⊗I)ᵀ`, so that the column qubits act as `C ξ_β`.
    pub xi2: ComplexMatrix,
}

impl LocalControls {
    /// Assembles the block generators from per-qubit controls.
    pub fn from_controls(controls: &[QubitControl], partition: BipartitePartition) -> Result<Self> {
        if controls.len() != partition.n() {
            return Err(QctrlError::DimensionMismatch(format!(
                "{} controls for {} qubits",
                controls.len(),
                partition.n()
            )));
        }
        let (ell, m) = (partition.ell(), partition.m());
        let mut xi1 = ComplexMatrix::zeros(partition.rows(), partition.rows());
        let mut xi2 = ComplexMatrix::zeros(partition.cols(), partition.cols());
        for (k, c) in controls.iter().enumerate() {
            let site = k + 1;
            if c.is_zero() {
                continue;
            }
            if site <= ell {
                xi1 += embed_operator(&c.generator(), site, ell)?;
            } else {
                xi2 += embed_operator(&c.generator().transpose(), site - ell, m)?;
            }
        }
        Ok(Self { xi1, xi2 })
    }

    /// Two-qubit controls from the two per-qubit generators.
    pub fn two_qubit(first: QubitControl, second: QubitControl) -> Self {
        Self {
            xi1: first.generator(),
            xi2: second.generator().transpose(),
        }
    }

    /// Zero controls for a partition.
    pub fn zero(partition: BipartitePartition) -> Self {
        Self {
            xi1: ComplexMatrix::zeros(partition.rows(), partition.rows()),
            xi2: ComplexMatrix::zeros(partition.cols(), partition.cols()),
        }
    }

    /// Whether both generators vanish.
    pub fn is_zero(&self) -> bool {
        self.xi1
            .iter()
            .chain(self.xi2.iter())
            .all(|z| *z == C64::new(0.0, 0.0))
    }

    /// Evaluates `ξ1 C + C ξ2ᵀ`.
    pub fn apply(&self, c: &ComplexMatrix) -> ComplexMatrix {
        &self.xi1 * c + c * self.xi2.transpose()
    }

    /// The control field as the operator sum `ξ1⊗I + I⊗ξ2`.
    pub fn operator_sum(&self) -> Result<OperatorSum> {
        let (r, c) = (self.xi1.nrows(), self.xi2.nrows());
        let one = C64::new(1.0, 0.0);
        let partition = crate::state::partition_for_shape(r, c)?;
        OperatorSum::from_terms(
            partition,
            vec![
                TensorTerm::new(one, self.xi1.clone(), ComplexMatrix::identity(c, c)),
                TensorTerm::new(one, ComplexMatrix::identity(r, r), self.xi2.clone()),
            ],
        )
    }

    fn require_shape(&self, partition: BipartitePartition) -> Result<()> {
        if self.xi1.shape() != (partition.rows(), partition.rows())
            || self.xi2.shape() != (partition.cols(), partition.cols())
        {
            return Err(QctrlError::DimensionMismatch(format!(
                "control generators {:?}/{:?} do not fit partition {}+{}",
                self.xi1.shape(),
                self.xi2.shape(),
                partition.ell(),
                partition.m()
            )));
        }
        for xi in [&self.xi1, &self.xi2] {
            let deviation = skew_hermitian_deviation(xi);
            if deviation > 1e-12 {
                return Err(QctrlError::NotSkewHermitian { deviation });
            }
        }
        Ok(())
    }
}

/// Drift operator sum and dense drift Hamiltonian of `graph`.
pub fn build_drift(
    graph: &SpinGraph,
    partition: BipartitePartition,
) -> Result<(OperatorSum, ComplexMatrix)> {
    let drift = DriftFactorization::from_graph(graph, partition)?;
    Ok((drift.operator_sum()?, drift_hamiltonian(graph)?))
}

/// Dense `Ĥ_d = Σ_{α<β} J_{αβ} σ3^{(α)} σ3^{(β)}` on `n` qubits.
pub fn drift_hamiltonian(graph: &SpinGraph) -> Result<ComplexMatrix> {
    let n = graph.n();
    require_dense(n)?;
    let dim = 1usize << n;
    let z = pauli(PauliIndex::Z);
    let mut h = ComplexMatrix::zeros(dim, dim);
    for (a, b, j) in graph.couplings() {
        h += embed_operator(&z, a, n)? * embed_operator(&z, b, n)? * C64::from(j);
    }
    Ok(h)
}

/// Control operator sum and dense control Hamiltonian
/// `Ĥ_c = Σ_α (v1 σ1^{(α)} + v2 σ2^{(α)})`; see [`control_hamiltonian`].
pub fn build_control(
    controls: &[QubitControl],
    partition: BipartitePartition,
) -> Result<(OperatorSum, ComplexMatrix)> {
    let local = LocalControls::from_controls(controls, partition)?;
    Ok((
        local.operator_sum()?,
        control_hamiltonian(controls, partition)?,
    ))
}

/// Dense control Hamiltonian of per-qubit controls: `v = -(x, y)` on row
/// qubits and `v = (-x, y)` on column qubits, the latter because a column
/// qubit generates `C ↦ Cξ`, which is `ξᵀ` acting on the state vector.
pub fn control_hamiltonian(
    controls: &[QubitControl],
    partition: BipartitePartition,
) -> Result<ComplexMatrix> {
    let n = controls.len();
    require_dense(n)?;
    if n != partition.n() {
        return Err(QctrlError::DimensionMismatch(format!(
            "{n} controls for {} qubits",
            partition.n()
        )));
    }
    let dim = 1usize << n;
    let mut h = ComplexMatrix::zeros(dim, dim);
    for (k, c) in controls.iter().enumerate() {
        let v2 = if k < partition.ell() { -c.y } else { c.y };
        let local = pauli(PauliIndex::X) * C64::from(-c.x) + pauli(PauliIndex::Y) * C64::from(v2);
        h += embed_operator(&local, k + 1, n)?;
    }
    Ok(h)
}

fn require_dense(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DENSE_QUBITS {
        return Err(QctrlError::InvalidArgument(format!(
            "dense operators support 1..={MAX_DENSE_QUBITS} qubits, got {n}"
        )));
    }
    Ok(())
}

/// Star-shaped couplings across the partition: qubit 1 couples to every
/// column qubit and every row qubit couples to qubit `ℓ+1`, all with
/// strength `j`. Returns the graph and its two-term factorization
/// `Σ1^{(1)} = σ3^{(1)}`, `Σ2^{(1)} = Σ_β σ3^{(β)}` and
/// `Σ1^{(2)} = Σ_{α ≥ 2} σ3^{(α)}`, `Σ2^{(2)} = σ3^{(ℓ+1)}`, each with
/// `ε = j`. For `ℓ = 1` the second term is absent.
pub fn standard_connected_couplings(
    partition: BipartitePartition,
    j: f64,
) -> Result<(SpinGraph, DriftFactorization)> {
    let (ell, m) = (partition.ell(), partition.m());
    let mut graph = SpinGraph::new(partition.n())?;
    for beta in ell + 1..=ell + m {
        graph.set(1, beta, j)?;
    }
    for alpha in 2..=ell {
        graph.set(alpha, ell + 1, j)?;
    }
    let z = pauli(PauliIndex::Z);
    let mut sum_b = ComplexMatrix::zeros(partition.cols(), partition.cols());
    for beta in 1..=m {
        sum_b += embed_operator(&z, beta, m)?;
    }
    let mut terms = vec![DriftTerm {
        epsilon: j,
        sigma1: embed_operator(&z, 1, ell)?,
        sigma2: sum_b.transpose(),
    }];
    if ell >= 2 {
        let mut sum_a = ComplexMatrix::zeros(partition.rows(), partition.rows());
        for alpha in 2..=ell {
            sum_a += embed_operator(&z, alpha, ell)?;
        }
        terms.push(DriftTerm {
            epsilon: j,
            sigma1: sum_a,
            sigma2: embed_operator(&z, 1, m)?.transpose(),
        });
    }
    Ok((graph, DriftFactorization::new(partition, terms)?))
}

/// A constant-coefficient generator on state matrices:
/// drift plus local controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    /// Factorized drift.
    pub drift: DriftFactorization,
    /// Control generators.
    pub controls: LocalControls,
}

impl Generator {
    /// Pairs a drift with controls after checking shapes.
    pub fn new(drift: DriftFactorization, controls: LocalControls) -> Result<Self> {
        controls.require_shape(drift.partition())?;
        Ok(Self { drift, controls })
    }

    /// Two-qubit generator `-iJσ3Cσ3ᵀ + ξ1C + Cξ2ᵀ`.
    pub fn two_qubit(j: f64, controls: LocalControls) -> Result<Self> {
        let z = pauli(PauliIndex::Z);
        let drift = DriftFactorization::new(
            BipartitePartition::two_qubit(),
            vec![DriftTerm {
                epsilon: j,
                sigma1: z.clone(),
                sigma2: z,
            }],
        )?;
        Self::new(drift, controls)
    }

    /// The partition.
    pub fn partition(&self) -> BipartitePartition {
        self.drift.partition()
    }

    /// Evaluates `dC/dt` at `c`.
    pub fn apply(&self, c: &ComplexMatrix) -> ComplexMatrix {
        self.drift.apply(c) + self.controls.apply(c)
    }

    /// Dense matrix of the generator on row-major flattened states.
    pub fn dense(&self) -> ComplexMatrix {
        let p = self.partition();
        let (r, c) = (p.rows(), p.cols());
        self.drift.hamiltonian() * (-I)
            + kron(&self.controls.xi1, &ComplexMatrix::identity(c, c))
            + kron(&ComplexMatrix::identity(r, r), &self.controls.xi2)
    }

    /// Upper bound on the operator norm of the generator.
    pub fn norm_bound(&self) -> f64 {
        self.drift.norm_bound() + frobenius(&self.controls.xi1) + frobenius(&self.controls.xi2)
    }
}

/// Closed-form uncontrolled two-qubit flow: `c00, c11` pick up
/// `e^{-iJt/4}` and `c01, c10` pick up `e^{iJt/4}`.
pub fn exact_uncontrolled_two_qubit(c0: &StateMatrix, j: f64, t: f64) -> Result<StateMatrix> {
    require_two_qubit(c0)?;
    Ok(StateMatrix::unchecked(
        c0.partition(),
        exact_uncontrolled_matrix(c0.matrix(), j, t),
    ))
}

/// [`exact_uncontrolled_two_qubit`] on a bare 2×2 matrix.
pub fn exact_uncontrolled_matrix(c: &ComplexMatrix, j: f64, t: f64) -> ComplexMatrix {
    let minus = (C64::new(0.0, -j * t / 4.0)).exp();
    let plus = minus.conj();
    let mut out = c.clone();
    out[(0, 0)] *= minus;
    out[(1, 1)] *= minus;
    out[(0, 1)] *= plus;
    out[(1, 0)] *= plus;
    out
}

fn require_two_qubit(c0: &StateMatrix) -> Result<()> {
    let p = c0.partition();
    if p.is_two_qubit() {
        Ok(())
    } else {
        Err(QctrlError::NotTwoQubit {
            ell: p.ell(),
            m: p.m(),
        })
    }
}

/// Exact constant-generator evolution `vec C(t) = exp(t G) vec C0`.
pub fn propagate_exact(generator: &Generator, c0: &StateMatrix, t: f64) -> Result<StateMatrix> {
    let p = generator.partition();
    require_state(c0, p)?;
    require_dense(p.n())?;
    if generator.controls.is_zero() && p.is_two_qubit() && generator.drift.terms().len() == 1 {
        let term = &generator.drift.terms()[0];
        let z = pauli(PauliIndex::Z);
        if term.sigma1 == z && term.sigma2 == z {
            return exact_uncontrolled_two_qubit(c0, term.epsilon, t);
        }
    }
    let u = expm(&(generator.dense() * C64::from(t)))?;
    let v = u * vectorize(c0.matrix());
    Ok(StateMatrix::unchecked(
        p,
        unvectorize(&v, p.rows(), p.cols()),
    ))
}

fn require_state(c0: &StateMatrix, partition: BipartitePartition) -> Result<()> {
    if c0.partition() != partition {
        return Err(QctrlError::DimensionMismatch(format!(
            "state on partition {}+{}, generator on {}+{}",
            c0.partition().ell(),
            c0.partition().m(),
            partition.ell(),
            partition.m()
        )));
    }
    Ok(())
}

/// Diagnostics of an oracle run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleLog {
    /// Number of RK4 steps taken.
    pub steps: usize,
    /// Step size used.
    pub dt: f64,
    /// Number of steps after which the state was renormalized.
    pub renormalizations: usize,
    /// Largest norm drift corrected by renormalization.
    pub max_correction: f64,
}

/// Default oracle step `1e-3 · min(1, 1/‖G‖)`.
pub fn default_oracle_dt(generator: &Generator) -> f64 {
    let norm = generator.norm_bound();
    1e-3 * if norm > 1.0 { 1.0 / norm } else { 1.0 }
}

/// Classical fourth-order Runge–Kutta integration of `dC/dt = G(C)` over
/// `[0, t]` with steps no longer than `dt`. The state is renormalized
/// after any step whose norm drift exceeds [`RENORMALIZE_TOL`]; every such
/// correction is counted in the returned log.
pub fn oracle_step(
    generator: &Generator,
    c0: &ComplexMatrix,
    t: f64,
    dt: f64,
) -> Result<(ComplexMatrix, OracleLog)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(QctrlError::InvalidArgument(format!(
            "step size must be positive, got {dt}"
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(QctrlError::InvalidArgument(format!(
            "duration must be non-negative, got {t}"
        )));
    }
    let steps_f = (t / dt).ceil();
    if steps_f > MAX_ORACLE_STEPS as f64 {
        return Err(QctrlError::IterationLimit(MAX_ORACLE_STEPS));
    }
    let steps = steps_f as usize;
    let mut log = OracleLog {
        steps,
        dt: if steps == 0 { 0.0 } else { t / steps as f64 },
        ..OracleLog::default()
    };
    let h = log.dt;
    let mut c = c0.clone();
    for _ in 0..steps {
        let k1 = generator.apply(&c);
        let k2 = generator.apply(&(&c + &k1 * C64::from(h / 2.0)));
        let k3 = generator.apply(&(&c + &k2 * C64::from(h / 2.0)));
        let k4 = generator.apply(&(&c + &k3 * C64::from(h)));
        c += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
        let norm2 = frobenius(&c).powi(2);
        let drift = (norm2 - 1.0).abs();
        if drift > RENORMALIZE_TOL {
            c /= C64::from(norm2.sqrt());
            log.renormalizations += 1;
            log.max_correction = log.max_correction.max(drift);
        }
    }
    Ok((c, log))
}

/// Quadrature grid for the series solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Truncation: largest total degree in the drift parameters.
    pub order: usize,
    /// Simpson nodes per unit time.
    pub nodes_per_unit_time: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_SERIES_ORDER,
            nodes_per_unit_time: DEFAULT_NODES_PER_UNIT_TIME,
        }
    }
}

/// Running Simpson integral of `f` sampled on a uniform grid with an even
/// number of intervals. Even nodes use the composite rule; odd nodes add a
/// three-point single-interval rule to the preceding even node.
fn cumulative_simpson(f: &[ComplexMatrix], h: f64) -> Vec<ComplexMatrix> {
    let (r, c) = f[0].shape();
    let mut out = vec![ComplexMatrix::zeros(r, c); f.len()];
    let mut i = 2;
    while i < f.len() {
        out[i] =
            &out[i - 2] + (&f[i - 2] + &f[i - 1] * C64::from(4.0) + &f[i]) * C64::from(h / 3.0);
        out[i - 1] = &out[i - 2]
            + (&f[i - 2] * C64::from(5.0) + &f[i - 1] * C64::from(8.0) - &f[i])
                * C64::from(h / 12.0);
        i += 2;
    }
    out
}

/// Multi-indices of `n` variables with total degree exactly `d`.
fn multi_indices(n: usize, d: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return if d == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in (0..=d).rev() {
        for mut rest in multi_indices(n - 1, d - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Partial sums of the power-series solution in the drift parameters:
/// entry `k` is the truncation at total degree `k`, for `k = 0..=order`.
///
/// The interaction-picture coefficients obey `Q_0 = C0` and
/// `Q_m(s) = Σ_{k: m_k > 0} ∫_0^s -i A_k(u) Q_{m-e_k}(u) B_k(u)ᵀ du` with
/// `A_k(u) = e^{-uξ1} Σ1^{(k)} e^{uξ1}` and `B_k(u) = e^{-uξ2} Σ2^{(k)} e^{uξ2}`;
/// the state is `C(t) = e^{tξ1} (Σ_m ε^m Q_m(t)) e^{tξ2ᵀ}`.
pub fn series_partial_sums(
    generator: &Generator,
    c0: &StateMatrix,
    t: f64,
    options: SeriesOptions,
) -> Result<Vec<ComplexMatrix>> {
    let p = generator.partition();
    require_state(c0, p)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(QctrlError::InvalidArgument(format!(
            "duration must be non-negative, got {t}"
        )));
    }
    if options.nodes_per_unit_time < 2 {
        return Err(QctrlError::InvalidArgument(
            "quadrature needs at least 2 nodes per unit time".into(),
        ));
    }
    let xi1 = &generator.controls.xi1;
    let xi2 = &generator.controls.xi2;
    let e1 = expm(&(xi1 * C64::from(t)))?;
    let e2t = expm(&(xi2 * C64::from(t)))?.transpose();
    let terms = generator.drift.terms();
    if t == 0.0 || options.order == 0 || terms.is_empty() {
        return Ok(vec![&e1 * c0.matrix() * &e2t; options.order + 1]);
    }
    let half_intervals = ((options.nodes_per_unit_time as f64 * t) / 2.0)
        .ceil()
        .max(1.0) as usize;
    let intervals = 2 * half_intervals;
    let h = t / intervals as f64;
    let mut rotated: Vec<Vec<(ComplexMatrix, ComplexMatrix)>> =
        vec![Vec::with_capacity(intervals + 1); terms.len()];
    for i in 0..=intervals {
        let u = i as f64 * h;
        let (f1, b1) = (expm(&(xi1 * C64::from(u)))?, expm(&(xi1 * C64::from(-u)))?);
        let (f2, b2) = (expm(&(xi2 * C64::from(u)))?, expm(&(xi2 * C64::from(-u)))?);
        for (k, term) in terms.iter().enumerate() {
            let a = &b1 * &term.sigma1 * &f1;
            let b = (&b2 * &term.sigma2 * &f2).transpose();
            rotated[k].push((a.map(|z| z * -I), b));
        }
    }
    let mut coefficients: BTreeMap<Vec<usize>, Vec<ComplexMatrix>> = BTreeMap::new();
    coefficients.insert(
        vec![0; terms.len()],
        vec![c0.matrix().clone(); intervals + 1],
    );
    let mut partial = vec![c0.matrix().clone()];
    for degree in 1..=options.order {
        let mut sum = c0.matrix().map(|_| C64::new(0.0, 0.0));
        for index in multi_indices(terms.len(), degree) {
            let mut integrand = vec![ComplexMatrix::zeros(p.rows(), p.cols()); intervals + 1];
            for k in (0..terms.len()).filter(|&k| index[k] > 0) {
                let mut lower = index.clone();
                lower[k] -= 1;
                let q = &coefficients[&lower];
                for (i, slot) in integrand.iter_mut().enumerate() {
                    let (a, b) = &rotated[k][i];
                    *slot += a * &q[i] * b;
                }
            }
            let q = cumulative_simpson(&integrand, h);
            let weight: f64 = index
                .iter()
                .zip(terms)
                .map(|(&e, term)| term.epsilon.powi(e as i32))
                .product();
            sum += &q[intervals] * C64::from(weight);
            coefficients.insert(index, q);
        }
        partial.push(partial[degree - 1].clone() + sum);
        coefficients.retain(|k, _| k.iter().sum::<usize>() >= degree);
    }
    Ok(partial.into_iter().map(|q| &e1 * q * &e2t).collect())
}

/// Truncated power-series solution for constant controls. The truncation
/// leaves the norm off by a term of the first omitted order, so the result
/// is not renormalized.
pub fn series_solve(
    drift: &DriftFactorization,
    controls: &LocalControls,
    c0: &StateMatrix,
    t: f64,
    options: SeriesOptions,
) -> Result<StateMatrix> {
    let generator = Generator::new(drift.clone(), controls.clone())?;
    let sums = series_partial_sums(&generator, c0, t, options)?;
    Ok(StateMatrix::unchecked(
        c0.partition(),
        sums.last().cloned().unwrap_or_else(|| c0.matrix().clone()),
    ))
}

/// Two-qubit series `C(t) = e^{tξ1} (Σ_{n ≤ N} Jⁿ P_n(t)) e^{tξ2ᵀ}` with
/// `P_n(t) = -i ∫_0^t Ad_{e^{-sξ1}}(σ3) P_{n-1}(s) Ad_{e^{-sξ2}}(σ3)ᵀ ds`.
pub fn series_solve_two_qubit(
    c0: &StateMatrix,
    j: f64,
    controls: &LocalControls,
    t: f64,
    truncation: usize,
    nodes_per_unit_time: usize,
) -> Result<StateMatrix> {
    require_two_qubit(c0)?;
    let generator = Generator::two_qubit(j, controls.clone())?;
    let sums = series_partial_sums(
        &generator,
        c0,
        t,
        SeriesOptions {
            order: truncation,
            nodes_per_unit_time,
        },
    )?;
    Ok(StateMatrix::unchecked(
        c0.partition(),
        sums[truncation].clone(),
    ))
}

/// Left-hand side of the small-time expansion:
/// `e^{-tξ1} C(t) e^{-tξ2ᵀ} - φ^{Jt}(C0)`, with `C(t)` from the exact
/// propagator and `φ` the uncontrolled flow.
pub fn interaction_deviation(
    c0: &StateMatrix,
    j: f64,
    controls: &LocalControls,
    t: f64,
) -> Result<ComplexMatrix> {
    require_two_qubit(c0)?;
    let generator = Generator::two_qubit(j, controls.clone())?;
    let c = propagate_exact(&generator, c0, t)?;
    let back = expm(&(&controls.xi1 * C64::from(-t)))?
        * c.matrix()
        * expm(&(&controls.xi2 * C64::from(-t)))?.transpose();
    Ok(back - exact_uncontrolled_matrix(c0.matrix(), j, t))
}

/// Terms of the small-time expansion of [`interaction_deviation`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmallTimeExpansion {
    /// `(Jt²/2)(B1 + B2)(C0)` with `B1 = [X_{ξ1⊗I}, -X_{iσ3⊗σ3}]`,
    /// `B2 = [X_{I⊗ξ2}, -X_{iσ3⊗σ3}]`.
    pub second_order: ComplexMatrix,
    /// `(J²t³/6)(-X_{iσ3⊗σ3})((B1 + B2)(C0))`.
    pub mixed_third_order: ComplexMatrix,
    /// `(J²t³/3)(B1 + B2)(-X_{iσ3⊗σ3}(C0))`, the other ordering of the
    /// same two fields, which also enters at order `J²t³`.
    pub reversed_mixed_third_order: ComplexMatrix,
    /// `(Jt³/6)` times the sum of the four double brackets of `ξ1`, `ξ2`
    /// with `-X_{iσ3⊗σ3}`.
    pub double_bracket_third_order: ComplexMatrix,
}

impl SmallTimeExpansion {
    /// The sum of the second-order, mixed and double-bracket terms only.
    pub fn without_reversed_term(&self) -> ComplexMatrix {
        &self.second_order + &self.mixed_third_order + &self.double_bracket_third_order
    }

    /// All terms through order `t³`.
    pub fn total(&self) -> ComplexMatrix {
        self.without_reversed_term() + &self.reversed_mixed_third_order
    }
}

/// Builds the brackets of the two-qubit small-time expansion at `c0`.
pub fn small_time_expansion(
    c0: &StateMatrix,
    j: f64,
    controls: &LocalControls,
    t: f64,
) -> Result<SmallTimeExpansion> {
    require_two_qubit(c0)?;
    let z = pauli_raw(3)?;
    let drift = |c: &ComplexMatrix| (&z * c * &z) * (-I);
    let left = |c: &ComplexMatrix| &controls.xi1 * c;
    let right = |c: &ComplexMatrix| c * controls.xi2.transpose();
    // [X_a, X_b](C) = b(a(C)) - a(b(C)) for linear fields
    let b1 = |c: &ComplexMatrix| drift(&left(c)) - left(&drift(c));
    let b2 = |c: &ComplexMatrix| drift(&right(c)) - right(&drift(c));
    let bsum = |c: &ComplexMatrix| b1(c) + b2(c);
    let c = c0.matrix();
    let double = |outer: &dyn Fn(&ComplexMatrix) -> ComplexMatrix,
                  inner: &dyn Fn(&ComplexMatrix) -> ComplexMatrix| {
        inner(&outer(c)) - outer(&inner(c))
    };
    let doubles =
        double(&left, &b1) + double(&left, &b2) + double(&right, &b1) + double(&right, &b2);
    Ok(SmallTimeExpansion {
        second_order: bsum(c) * C64::from(j * t * t / 2.0),
        mixed_third_order: drift(&bsum(c)) * C64::from(j * j * t.powi(3) / 6.0),
        reversed_mixed_third_order: bsum(&drift(c)) * C64::from(j * j * t.powi(3) / 3.0),
        double_bracket_third_order: doubles * C64::from(j * t.powi(3) / 6.0),
    })
}

/// Constant-control solver choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Solver {
    /// Dense matrix exponential (closed form when uncontrolled on two qubits).
    Exact,
    /// Truncated power series in the couplings.
    Series(SeriesOptions),
    /// RK4 reference integrator; `dt = None` selects the default step.
    Oracle {
        /// Step size.
        dt: Option<f64>,
    },
}

/// One sample of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    /// Time.
    pub t: f64,
    /// State.
    pub state: StateMatrix,
    /// Singular values in descending order.
    pub lambdas: Vec<f64>,
    /// Entanglement measure `F`.
    pub f: f64,
    /// Stratum label.
    pub stratum: String,
}

/// Time series of states with their entanglement data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    samples: Vec<TrajectorySample>,
    oracle: OracleLog,
}

/// Label of the orbit type: `M0`/`M1`/`M2` for two qubits, otherwise the
/// singular-value multiplicities joined by `+`, with zeros written `0^k`.
pub fn stratum_label(state: &StateMatrix) -> Result<String> {
    if state.partition().is_two_qubit() {
        return Ok(classify_stratum(state, SINGULAR_VALUE_TOL)?.to_string());
    }
    let orbit = orbit_type(state, SINGULAR_VALUE_TOL)?;
    let mut parts: Vec<String> = orbit.multiplicities.iter().map(|k| k.to_string()).collect();
    if orbit.singular {
        if let Some(last) = parts.last_mut() {
            *last = format!("0^{last}");
        }
    }
    Ok(parts.join("+"))
}

impl TrajectoryRecord {
    /// Appends a sample; fails if the state has left the unit sphere by
    /// more than [`TRAJECTORY_NORM_TOL`].
    pub fn push(&mut self, t: f64, state: StateMatrix) -> Result<()> {
        let deviation = state.norm_deviation();
        if deviation > TRAJECTORY_NORM_TOL {
            return Err(QctrlError::NotNormalized { deviation });
        }
        let lambdas = singular_values(state.matrix());
        let f = measure_f_matrix(state.matrix());
        let stratum = stratum_label(&state)?;
        self.samples.push(TrajectorySample {
            t,
            state,
            lambdas,
            f,
            stratum,
        });
        Ok(())
    }

    /// The samples in time order.
    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    /// The last sample.
    pub fn last(&self) -> Option<&TrajectorySample> {
        self.samples.last()
    }

    /// Accumulated oracle diagnostics (zero for other solvers).
    pub fn oracle_log(&self) -> OracleLog {
        self.oracle
    }

    /// CSV header: `t`, `c_<bits>_re`, `c_<bits>_im` in row-major order,
    /// `lambda_1..`, `F`, `sqrtF`, `stratum`.
    pub fn csv_header(partition: BipartitePartition) -> Vec<String> {
        let (ell, m) = (partition.ell(), partition.m());
        let mut cols = vec!["t".to_string()];
        for a in 0..partition.rows() {
            for b in 0..partition.cols() {
                let bits = format!("{a:0ell$b}{b:0m$b}");
                cols.push(format!("c_{bits}_re"));
                cols.push(format!("c_{bits}_im"));
            }
        }
        for k in 1..=partition.rows() {
            cols.push(format!("lambda_{k}"));
        }
        cols.extend(["F", "sqrtF", "stratum"].map(String::from));
        cols
    }

    /// CSV rows matching [`TrajectoryRecord::csv_header`].
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.samples
            .iter()
            .map(|s| {
                let mut row = vec![s.t.to_string()];
                for z in iota_inverse(&s.state) {
                    row.push(z.re.to_string());
                    row.push(z.im.to_string());
                }
                row.extend(s.lambdas.iter().map(|l| l.to_string()));
                row.push(s.f.to_string());
                row.push(s.f.max(0.0).sqrt().to_string());
                row.push(s.stratum.clone());
                row
            })
            .collect()
    }
}

/// Evolves `c0` under one constant generator for time `t` with `solver`.
pub fn solve_constant(
    generator: &Generator,
    c0: &StateMatrix,
    t: f64,
    solver: Solver,
) -> Result<(StateMatrix, OracleLog)> {
    match solver {
        Solver::Exact => Ok((propagate_exact(generator, c0, t)?, OracleLog::default())),
        Solver::Series(options) => {
            let sums = series_partial_sums(generator, c0, t, options)?;
            let c = sums.last().cloned().unwrap_or_else(|| c0.matrix().clone());
            Ok((
                StateMatrix::unchecked(c0.partition(), c),
                OracleLog::default(),
            ))
        }
        Solver::Oracle { dt } => {
            require_state(c0, generator.partition())?;
            let dt = dt.unwrap_or_else(|| default_oracle_dt(generator));
            let (c, log) = oracle_step(generator, c0.matrix(), t, dt)?;
            Ok((StateMatrix::unchecked(c0.partition(), c), log))
        }
    }
}

/// Oracle trajectory of a schedule, sampled `samples_per_segment` times
/// per segment.
pub fn oracle_integrate(
    graph: &SpinGraph,
    partition: BipartitePartition,
    schedule: &ControlSchedule,
    c0: &StateMatrix,
    dt: Option<f64>,
    samples_per_segment: usize,
) -> Result<TrajectoryRecord> {
    continue_schedule(
        graph,
        partition,
        schedule,
        c0,
        Solver::Oracle { dt },
        samples_per_segment,
    )
}

/// Runs `solver` segment by segment, chaining final states. Within a
/// segment the exact and series solvers restart from the segment's initial
/// state at every sample time; the oracle advances from sample to sample.
pub fn continue_schedule(
    graph: &SpinGraph,
    partition: BipartitePartition,
    schedule: &ControlSchedule,
    c0: &StateMatrix,
    solver: Solver,
    samples_per_segment: usize,
) -> Result<TrajectoryRecord> {
    require_graph_partition(graph, partition)?;
    require_state(c0, partition)?;
    let samples = samples_per_segment.max(1);
    let drift = DriftFactorization::from_graph(graph, partition)?;
    let mut record = TrajectoryRecord::default();
    record.push(0.0, c0.clone())?;
    let mut start = c0.clone();
    let mut t0 = 0.0;
    for segment in schedule.segments() {
        let controls = LocalControls::from_controls(&segment.controls, partition)?;
        let generator = Generator::new(drift.clone(), controls)?;
        let mut current = start.clone();
        let mut previous_tau = 0.0;
        for k in 1..=samples {
            let tau = segment.duration * k as f64 / samples as f64;
            let (next, log) = match solver {
                Solver::Oracle { .. } => {
                    solve_constant(&generator, &current, tau - previous_tau, solver)?
                }
                _ => solve_constant(&generator, &start, tau, solver)?,
            };
            record.oracle.steps += log.steps;
            record.oracle.dt = record.oracle.dt.max(log.dt);
            record.oracle.renormalizations += log.renormalizations;
            record.oracle.max_correction = record.oracle.max_correction.max(log.max_correction);
            record.push(t0 + tau, next.clone())?;
            current = next;
            previous_tau = tau;
        }
        start = current;
        t0 += segment.duration;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{iota, measure_f};
    use crate::tensor::{max_abs, re};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn half_ones() -> StateMatrix {
        StateMatrix::from_matrix(ComplexMatrix::from_element(2, 2, re(0.5))).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, p: BipartitePartition) -> StateMatrix {
        let c = ComplexMatrix::from_fn(p.rows(), p.cols(), |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        StateMatrix::normalized(p, c).unwrap()
    }

    fn random_controls(rng: &mut ChaCha8Rng, n: usize) -> Vec<QubitControl> {
        (0..n)
            .map(|_| QubitControl::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn two_qubit_drift_is_j_sigma3_sigma3() {
        let p = BipartitePartition::two_qubit();
        let (sum, h) = build_drift(&SpinGraph::two_qubit(0.7).unwrap(), p).unwrap();
        let z = pauli(PauliIndex::Z);
        assert!(max_abs(&(h - kron(&z, &z) * C64::from(0.7))) < 1e-15);
        let c = half_ones();
        let field = crate::lie::apply_field_matrix(&sum, c.matrix());
        let want = (&z * c.matrix() * &z) * C64::new(0.0, -0.7);
        assert!(max_abs(&(field - want)) < 1e-15);
    }

    #[test]
    fn uncoupled_graph_has_zero_drift() {
        let g = SpinGraph::new(3).unwrap();
        let (sum, h) = build_drift(&g, BipartitePartition::new(1, 2).unwrap()).unwrap();
        assert!(sum.is_zero());
        assert_eq!(max_abs(&h), 0.0);
    }

    #[test]
    fn single_control_on_first_qubit_is_left_multiplication() {
        let p = BipartitePartition::two_qubit();
        let (sum, _) =
            build_control(&[QubitControl::new(1.0, 0.0), QubitControl::default()], p).unwrap();
        let c = half_ones();
        let field = crate::lie::apply_field_matrix(&sum, c.matrix());
        let want = pauli(PauliIndex::X) * I * c.matrix();
        assert!(max_abs(&(field - want)) < 1e-15);
    }

    #[test]
    fn dense_and_bipartite_fields_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (ell, m) in [(1, 1), (1, 2), (2, 2)] {
            let p = BipartitePartition::new(ell, m).unwrap();
            let n = p.n();
            let mut g = SpinGraph::new(n).unwrap();
            for a in 1..=n {
                for b in a + 1..=n {
                    g.set(a, b, rng.random_range(-1.0..1.0)).unwrap();
                }
            }
            let controls = random_controls(&mut rng, n);
            let h = drift_hamiltonian(&g).unwrap() + control_hamiltonian(&controls, p).unwrap();
            let generator = Generator::new(
                DriftFactorization::from_graph(&g, p).unwrap(),
                LocalControls::from_controls(&controls, p).unwrap(),
            )
            .unwrap();
            let c = random_state(&mut rng, p);
            let psi = vectorize(c.matrix());
            let dense = (&h * psi) * (-I);
            let field = vectorize(&generator.apply(c.matrix()));
            assert!((dense - field).camax() < 1e-13, "partition {ell}+{m}");
            assert!(frobenius(&(generator.dense() + h * I)) < 1e-13);
        }
    }

    #[test]
    fn uncontrolled_closed_form_examples() {
        let c0 = half_ones();
        assert_eq!(exact_uncontrolled_two_qubit(&c0, 1.0, 0.0).unwrap(), c0);
        let j = 2.0;
        let c = exact_uncontrolled_two_qubit(&c0, j, std::f64::consts::PI / j).unwrap();
        let a = C64::new(0.0, -std::f64::consts::FRAC_PI_4).exp() * 0.5;
        let b = a.conj();
        let want = ComplexMatrix::from_row_slice(2, 2, &[a, b, b, a]);
        assert!(max_abs(&(c.matrix() - want)) < 1e-15);
        for t in [0.3, 1.0, 2.5] {
            let f = measure_f(&exact_uncontrolled_two_qubit(&c0, 1.0, t).unwrap());
            assert!((f - (1.0 - t.cos()) / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_matches_closed_form_and_has_fourth_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c0 = random_state(&mut rng, BipartitePartition::two_qubit());
        let g = Generator::two_qubit(3.0, LocalControls::zero(BipartitePartition::two_qubit()))
            .unwrap();
        let exact = exact_uncontrolled_two_qubit(&c0, 3.0, 1.0).unwrap();
        let (fine, _) = oracle_step(&g, c0.matrix(), 1.0, 1e-3).unwrap();
        assert!(max_abs(&(fine - exact.matrix())) < 1e-9);
        let err =
            |dt: f64| max_abs(&(oracle_step(&g, c0.matrix(), 1.0, dt).unwrap().0 - exact.matrix()));
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
    }

    #[test]
    fn oracle_with_local_control_matches_matrix_exponential() {
        let p = BipartitePartition::two_qubit();
        let controls =
            LocalControls::two_qubit(QubitControl::new(1.0, 0.0), QubitControl::default());
        let g = Generator::two_qubit(0.0, controls.clone()).unwrap();
        let c0 = half_ones();
        let (c, _) = oracle_step(&g, c0.matrix(), 1.0, 1e-3).unwrap();
        let want = expm(&controls.xi1).unwrap() * c0.matrix();
        assert!(max_abs(&(c - want)) < 1e-12);
        let zero = Generator::two_qubit(0.0, LocalControls::zero(p)).unwrap();
        let (same, log) = oracle_step(&zero, c0.matrix(), 2.0, 1e-2).unwrap();
        assert_eq!(same, c0.matrix().clone());
        assert_eq!(log.renormalizations, 0);
    }

    #[test]
    fn series_order_zero_is_local_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = BipartitePartition::two_qubit();
        let c0 = random_state(&mut rng, p);
        let controls =
            LocalControls::two_qubit(QubitControl::new(0.3, -0.4), QubitControl::new(0.2, 0.9));
        let g = Generator::two_qubit(0.5, controls.clone()).unwrap();
        let opts = SeriesOptions {
            order: 0,
            ..SeriesOptions::default()
        };
        let s = series_partial_sums(&g, &c0, 0.8, opts).unwrap();
        let want = expm(&(&controls.xi1 * C64::from(0.8))).unwrap()
            * c0.matrix()
            * expm(&(&controls.xi2 * C64::from(0.8))).unwrap().transpose();
        assert!(max_abs(&(&s[0] - want)) < 1e-13);
        assert!((measure_f_matrix(&s[0]) - measure_f(&c0)).abs() < 1e-13);
        let zero_drift = Generator::two_qubit(0.0, controls).unwrap();
        let full = series_partial_sums(&zero_drift, &c0, 0.8, SeriesOptions::default()).unwrap();
        assert!(max_abs(&(&full[3] - &s[0])) < 1e-13);
    }

    #[test]
    fn uncontrolled_series_reproduces_taylor_polynomials() {
        let p = BipartitePartition::two_qubit();
        let c0 = half_ones();
        let (j, t) = (0.7, 1.0);
        for n in 1..=4 {
            let c = series_solve_two_qubit(&c0, j, &LocalControls::zero(p), t, n, 512).unwrap();
            let taylor = |x: C64| {
                (0..=n).fold(C64::new(0.0, 0.0), |acc, k| {
                    acc + x.powi(k as i32) / (1..=k).product::<usize>().max(1) as f64
                })
            };
            let minus = taylor(C64::new(0.0, -j * t / 4.0)) * 0.5;
            let plus = taylor(C64::new(0.0, j * t / 4.0)) * 0.5;
            let m = c.matrix();
            assert!((m[(0, 0)] - minus).norm() < 1e-11, "order {n}");
            assert!((m[(0, 1)] - plus).norm() < 1e-11, "order {n}");
        }
    }

    #[test]
    fn high_order_series_matches_exact_propagator() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = BipartitePartition::two_qubit();
        let c0 = random_state(&mut rng, p);
        let controls =
            LocalControls::two_qubit(QubitControl::new(1.0, 0.0), QubitControl::new(0.0, 1.0));
        let c = series_solve_two_qubit(&c0, 0.1, &controls, 1.0, 6, 1024).unwrap();
        let g = Generator::two_qubit(0.1, controls).unwrap();
        let exact = propagate_exact(&g, &c0, 1.0).unwrap();
        assert!(max_abs(&(c.matrix() - exact.matrix())) < 1e-9);
    }

    #[test]
    fn general_series_agrees_with_two_qubit_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = BipartitePartition::two_qubit();
        let c0 = random_state(&mut rng, p);
        let controls =
            LocalControls::two_qubit(QubitControl::new(0.4, 0.1), QubitControl::new(-0.2, 0.5));
        let drift = DriftFactorization::from_graph(&SpinGraph::two_qubit(0.3).unwrap(), p).unwrap();
        let general = series_solve(&drift, &controls, &c0, 0.9, SeriesOptions::default()).unwrap();
        let special = series_solve_two_qubit(&c0, 0.3, &controls, 0.9, 3, 512).unwrap();
        assert!(max_abs(&(general.matrix() - special.matrix())) < 1e-10);
    }

    #[test]
    fn star_couplings_for_one_plus_two() {
        let p = BipartitePartition::new(1, 2).unwrap();
        let (g, drift) = standard_connected_couplings(p, 0.5).unwrap();
        let edges: Vec<_> = g.couplings().collect();
        assert_eq!(edges, vec![(1, 2, 0.5), (1, 3, 0.5)]);
        assert_eq!(drift.terms().len(), 1);
        let dense = drift_hamiltonian(&g).unwrap();
        assert!(max_abs(&(drift.hamiltonian() - dense)) < 1e-15);
        let p22 = BipartitePartition::new(2, 2).unwrap();
        let (g22, d22) = standard_connected_couplings(p22, 0.2).unwrap();
        assert_eq!(g22.couplings().count(), 3);
        assert!(max_abs(&(d22.hamiltonian() - drift_hamiltonian(&g22).unwrap())) < 1e-15);
        let (g11, d11) =
            standard_connected_couplings(BipartitePartition::two_qubit(), 1.0).unwrap();
        assert_eq!(g11.couplings().count(), 1);
        assert_eq!(d11.terms().len(), 1);
    }

    #[test]
    fn schedule_segments_chain() {
        let p = BipartitePartition::two_qubit();
        let g = SpinGraph::two_qubit(0.8).unwrap();
        let controls = vec![QubitControl::new(0.3, 0.2), QubitControl::new(-0.1, 0.4)];
        let c0 = half_ones();
        let one = ControlSchedule::constant(1.0, controls.clone()).unwrap();
        let two = ControlSchedule::new(
            vec![
                ControlSegment {
                    duration: 0.5,
                    controls: controls.clone(),
                },
                ControlSegment {
                    duration: 0.5,
                    controls,
                },
            ],
            2,
        )
        .unwrap();
        let solver = Solver::Oracle { dt: Some(1e-3) };
        let a = continue_schedule(&g, p, &one, &c0, solver, 1).unwrap();
        let b = continue_schedule(&g, p, &two, &c0, solver, 1).unwrap();
        let (sa, sb) = (a.last().unwrap(), b.last().unwrap());
        assert!(max_abs(&(sa.state.matrix() - sb.state.matrix())) < 1e-9);
        for s in b.samples() {
            assert!(s.state.norm_deviation() < 1e-8);
        }
        let direct = propagate_exact(
            &Generator::new(
                DriftFactorization::from_graph(&g, p).unwrap(),
                LocalControls::from_controls(&one.segments()[0].controls, p).unwrap(),
            )
            .unwrap(),
            &c0,
            1.0,
        )
        .unwrap();
        let exact = continue_schedule(&g, p, &one, &c0, Solver::Exact, 1).unwrap();
        assert_eq!(exact.last().unwrap().state, direct);
    }

    #[test]
    fn small_time_expansion_needs_reversed_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c0 = random_state(&mut rng, BipartitePartition::two_qubit());
        let controls =
            LocalControls::two_qubit(QubitControl::new(0.6, -0.3), QubitControl::new(0.2, 0.7));
        let j = 1.0;
        let ts = crate::fit::logspace(1e-3, 1e-1, 8);
        let residual = |full: bool| -> Vec<f64> {
            ts.iter()
                .map(|&t| {
                    let dev = interaction_deviation(&c0, j, &controls, t).unwrap();
                    let e = small_time_expansion(&c0, j, &controls, t).unwrap();
                    let approx = if full {
                        e.total()
                    } else {
                        e.without_reversed_term()
                    };
                    frobenius(&(dev - approx))
                })
                .collect()
        };
        let with = crate::fit::log_log_slope(&ts, &residual(true)).unwrap();
        let without = crate::fit::log_log_slope(&ts, &residual(false)).unwrap();
        assert!(with >= 3.9, "slope with reversed term {with}");
        assert!((without - 3.0).abs() < 0.1, "slope without it {without}");
    }

    #[test]
    fn trajectory_csv_layout() {
        let p = BipartitePartition::new(1, 2).unwrap();
        let header = TrajectoryRecord::csv_header(p);
        assert_eq!(header[1], "c_000_re");
        assert_eq!(header[4], "c_001_im");
        assert_eq!(header.len(), 1 + 16 + 2 + 3);
        let mut rec = TrajectoryRecord::default();
        let psi: Vec<C64> = (0..8).map(|k| re(if k == 0 { 1.0 } else { 0.0 })).collect();
        rec.push(0.0, iota(&psi, p).unwrap()).unwrap();
        let rows = rec.csv_rows();
        assert_eq!(rows[0].len(), header.len());
        assert_eq!(rows[0].last().unwrap(), "1+0^1");
    }

    #[test]
    fn off_sphere_samples_are_rejected() {
        let mut rec = TrajectoryRecord::default();
        let bad = StateMatrix::unchecked(
            BipartitePartition::two_qubit(),
            ComplexMatrix::identity(2, 2),
        );
        assert!(matches!(
            rec.push(0.0, bad),
            Err(QctrlError::NotNormalized { .. })
        ));
    }

    #[test]
    fn graph_validation() {
        let mut g = SpinGraph::new(3).unwrap();
        assert!(g.set(1, 1, 1.0).is_err());
        assert!(g.set(0, 2, 1.0).is_err());
        assert!(g.set(1, 4, 1.0).is_err());
        g.set(3, 1, 2.0).unwrap();
        assert_eq!(g.coupling(1, 3), 2.0);
        g.set(1, 3, 0.0).unwrap();
        assert!(g.is_uncoupled());
        assert!(ControlSchedule::new(
            vec![ControlSegment {
                duration: 0.0,
                controls: vec![QubitControl::default(); 3]
            }],
            3
        )
        .is_err());
    }
}
