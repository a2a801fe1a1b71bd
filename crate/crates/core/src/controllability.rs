//! Controllability of the NMR register.
//!
//! The system is controllable exactly when the Lie algebra generated by
//! `-iĤ_0 = -i Σ J_{αβ} σ3^{(α)} σ3^{(β)}` and the control directions
//! `-iσ1^{(α)}`, `-iσ2^{(α)}` is `su(2^n)`, which happens exactly when the
//! spin graph (edges where `J_{αβ} ≠ 0`) is connected. This module checks
//! connectivity, certifies the algebra by closure, and builds explicit
//! bracket words that isolate individual interaction terms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::SpinGraph;
use crate::error::{QctrlError, Result};
use crate::lie::{lie_closure_with, PauliString, PauliSum};
use crate::par::{self, Execution};

/// Largest register the closure certifier accepts.
pub const MAX_CERTIFY_QUBITS: usize = 5;

/// Default cap on bracketing rounds.
pub const DEFAULT_MAX_ROUNDS: usize = 64;

/// Relative tolerance when matching a bracket word against its target.
pub const WITNESS_TOL: f64 = 1e-12;

/// Connected components of the spin graph, each sorted, ordered by their
/// smallest node.
pub fn components(graph: &SpinGraph) -> Vec<Vec<usize>> {
    let n = graph.n();
    let mut adjacency = vec![Vec::new(); n + 1];
    for (a, b, _) in graph.couplings() {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut seen = vec![false; n + 1];
    let mut out = Vec::new();
    for start in 1..=n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Whether the spin graph is connected, with its components.
pub fn is_connected(graph: &SpinGraph) -> (bool, Vec<Vec<usize>>) {
    let comps = components(graph);
    (comps.len() == 1, comps)
}

/// `Σ_i (4^{n_i} - 1)` over components of sizes `n_i`.
pub fn predicted_dimension(components: &[Vec<usize>]) -> usize {
    components
        .iter()
        .map(|c| (1usize << (2 * c.len())) - 1)
        .sum()
}

/// Outcome of a closure certification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllabilityReport {
    /// Number of qubits.
    pub n: usize,
    /// Whether the spin graph is connected.
    pub connected: bool,
    /// Dimension of the generated Lie algebra.
    pub closure_dim: usize,
    /// `4^n - 1`.
    pub full_dim: usize,
    /// Connected components of the spin graph.
    pub components: Vec<Vec<usize>>,
    /// `Σ_i (4^{n_i} - 1)`, the dimension expected from the components.
    pub predicted_dim: usize,
    /// Whether the closure is all of `su(2^n)`.
    pub verdict: bool,
    /// Bracketing rounds used by the closure.
    pub rounds: usize,
}

/// Generator of the control algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeneratorLabel {
    /// `-iĤ_0`.
    Drift,
    /// `-iσ1^{(α)}`.
    Sigma1(usize),
    /// `-iσ2^{(α)}`.
    Sigma2(usize),
}

impl fmt::Display for GeneratorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorLabel::Drift => f.write_str("-iH0"),
            GeneratorLabel::Sigma1(a) => write!(f, "-iσ1^({a})"),
            GeneratorLabel::Sigma2(a) => write!(f, "-iσ2^({a})"),
        }
    }
}

/// `-iĤ_0` in Pauli coordinates.
pub fn drift_generator(graph: &SpinGraph) -> Result<PauliSum> {
    let n = graph.n();
    let mut sum = PauliSum::zero(n);
    for (a, b, j) in graph.couplings() {
        let mut idx = vec![0u8; n];
        idx[a - 1] = 3;
        idx[b - 1] = 3;
        sum.add_term(PauliString::new(idx, 1.0)?.key(), -j);
    }
    Ok(sum)
}

/// The Pauli sum of a generator label.
pub fn generator(graph: &SpinGraph, label: GeneratorLabel) -> Result<PauliSum> {
    let n = graph.n();
    match label {
        GeneratorLabel::Drift => drift_generator(graph),
        GeneratorLabel::Sigma1(a) => Ok(PauliSum::from_string(&PauliString::site(1, a, n, -1.0)?)),
        GeneratorLabel::Sigma2(a) => Ok(PauliSum::from_string(&PauliString::site(2, a, n, -1.0)?)),
    }
}

/// All generators: the drift followed by `-iσ1^{(α)}` and `-iσ2^{(α)}`.
pub fn generators(graph: &SpinGraph) -> Result<Vec<PauliSum>> {
    let mut out = vec![drift_generator(graph)?];
    for a in 1..=graph.n() {
        out.push(generator(graph, GeneratorLabel::Sigma1(a))?);
    }
    for a in 1..=graph.n() {
        out.push(generator(graph, GeneratorLabel::Sigma2(a))?);
    }
    Ok(out)
}

/// Certifies controllability by Lie closure on the parallel pool.
pub fn closure_certify(graph: &SpinGraph) -> Result<ControllabilityReport> {
    closure_certify_with(graph, DEFAULT_MAX_ROUNDS, Execution::Parallel)
}

/// Certifies controllability by Lie closure.
pub fn closure_certify_with(
    graph: &SpinGraph,
    max_rounds: usize,
    exec: Execution,
) -> Result<ControllabilityReport> {
    let n = graph.n();
    if n > MAX_CERTIFY_QUBITS {
        return Err(QctrlError::InvalidArgument(format!(
            "closure certification supports up to {MAX_CERTIFY_QUBITS} qubits, got {n}"
        )));
    }
    let closure = lie_closure_with(&generators(graph)?, n, max_rounds, exec)?;
    let (connected, comps) = is_connected(graph);
    let full_dim = (1usize << (2 * n)) - 1;
    Ok(ControllabilityReport {
        n,
        connected,
        closure_dim: closure.dimension,
        full_dim,
        predicted_dim: predicted_dimension(&comps),
        components: comps,
        verdict: closure.dimension == full_dim,
        rounds: closure.rounds,
    })
}

/// One graph of an exhaustive sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepEntry {
    /// Edge subset as a bit mask over the pairs `(α, β)`, `α < β`, in
    /// lexicographic order.
    pub mask: u32,
    /// Certification result.
    pub report: ControllabilityReport,
}

impl SweepEntry {
    /// Whether the closure verdict matches connectivity and the closure
    /// dimension matches the component prediction.
    pub fn consistent(&self) -> bool {
        self.report.verdict == self.report.connected
            && self.report.closure_dim == self.report.predicted_dim
    }
}

/// Pairs `(α, β)` with `α < β` in lexicographic order.
pub fn edge_pairs(n: usize) -> Vec<(usize, usize)> {
    (1..=n)
        .flat_map(|a| (a + 1..=n).map(move |b| (a, b)))
        .collect()
}

/// The graph whose edges are the pairs selected by `mask`, each with the
/// given coupling.
pub fn graph_from_mask(n: usize, mask: u32, coupling: f64) -> Result<SpinGraph> {
    let pairs = edge_pairs(n);
    SpinGraph::with_couplings(
        n,
        pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &(a, b))| (a, b, coupling)),
    )
}

/// Certifies every edge subset on `n` qubits with unit couplings. Graphs
/// are distributed over the pool when `exec` is parallel; each closure runs
/// sequentially.
pub fn exhaustive_sweep(n: usize, exec: Execution) -> Result<Vec<SweepEntry>> {
    let pairs = edge_pairs(n).len();
    if pairs > 16 {
        return Err(QctrlError::InvalidArgument(format!(
            "exhaustive sweep over {pairs} edges is too large"
        )));
    }
    par::map_range(exec, 1usize << pairs, |mask| {
        let graph = graph_from_mask(n, mask as u32, 1.0)?;
        let report = closure_certify_with(&graph, DEFAULT_MAX_ROUNDS, Execution::Sequential)?;
        Ok(SweepEntry {
            mask: mask as u32,
            report,
        })
    })
    .into_iter()
    .collect()
}

/// Number of Pauli strings with exactly `k` identity factors, for
/// `k = 0..n-1`, counted by enumeration.
pub fn identity_weight_dimensions(n: usize) -> Vec<usize> {
    let mut dims = vec![0usize; n];
    for key in 1u32..(1u32 << (2 * n)) {
        let ids = (0..n).filter(|s| key >> (2 * s) & 3 == 0).count();
        dims[ids] += 1;
    }
    dims
}

/// `C(n, k) · 3^{n-k}`.
pub fn identity_weight_formula(n: usize, k: usize) -> usize {
    let binom = (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
    binom * 3usize.pow((n - k) as u32)
}

/// A nested commutator of generators.
#[derive(Debug, Clone, PartialEq)]
pub enum BracketWord {
    /// A generator.
    Gen(GeneratorLabel),
    /// `[left, right]`.
    Bracket(Box<BracketWord>, Box<BracketWord>),
    /// A real multiple.
    Scale(f64, Box<BracketWord>),
}

impl BracketWord {
    /// A generator leaf.
    pub fn gen(label: GeneratorLabel) -> Self {
        BracketWord::Gen(label)
    }

    /// `[self, other]`.
    pub fn bracket(self, other: BracketWord) -> Self {
        BracketWord::Bracket(Box::new(self), Box::new(other))
    }

    /// `s · self`.
    pub fn scale(self, s: f64) -> Self {
        BracketWord::Scale(s, Box::new(self))
    }

    /// Evaluates the word in Pauli coordinates.
    pub fn evaluate(&self, graph: &SpinGraph) -> Result<PauliSum> {
        match self {
            BracketWord::Gen(label) => generator(graph, *label),
            BracketWord::Bracket(a, b) => a.evaluate(graph)?.bracket(&b.evaluate(graph)?),
            BracketWord::Scale(s, w) => Ok(w.evaluate(graph)?.scale(*s)),
        }
    }

    /// Nesting depth; generators have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            BracketWord::Gen(_) => 0,
            BracketWord::Bracket(a, b) => 1 + a.depth().max(b.depth()),
            BracketWord::Scale(_, w) => w.depth(),
        }
    }
}

impl fmt::Display for BracketWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketWord::Gen(label) => write!(f, "{label}"),
            BracketWord::Bracket(a, b) => write!(f, "[{a}, {b}]"),
            BracketWord::Scale(s, w) => write!(f, "{s}·{w}"),
        }
    }
}

/// A bracket word together with its target and the scalar relating them.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    /// The word.
    pub word: BracketWord,
    /// Target element `-iσ3^{(α)}σ3^{(β)}`.
    pub target: PauliSum,
    /// Nonzero `r` with `word = r · target`.
    pub scalar: f64,
}

/// The element `-iσ3^{(α)}σ3^{(β)}`.
pub fn zz_target(n: usize, alpha: usize, beta: usize) -> Result<PauliSum> {
    for s in [alpha, beta] {
        if s == 0 || s > n {
            return Err(QctrlError::SiteOutOfRange { site: s, qubits: n });
        }
    }
    let mut idx = vec![0u8; n];
    idx[alpha - 1] = 3;
    idx[beta - 1] = 3;
    Ok(PauliSum::from_string(&PauliString::new(idx, -1.0)?))
}

fn certify(word: BracketWord, graph: &SpinGraph, alpha: usize, beta: usize) -> Result<Witness> {
    let value = word.evaluate(graph)?;
    let target = zz_target(graph.n(), alpha, beta)?;
    let scalar = value
        .proportionality(&target, WITNESS_TOL)
        .ok_or_else(|| QctrlError::UnmatchedBracket(format!("{word} = {value}")))?;
    Ok(Witness {
        word,
        target,
        scalar,
    })
}

/// The word `[-iσ1^{(α)}, [-iσ1^{(β)}, [[-iĤ_0, -iσ1^{(α)}], -iσ1^{(β)}]]]`,
/// a nonzero multiple of `-iσ3^{(α)}σ3^{(β)}` when `J_{αβ} ≠ 0`.
pub fn witness_lemma_b2(graph: &SpinGraph, alpha: usize, beta: usize) -> Result<Witness> {
    if alpha == beta || graph.coupling(alpha, beta) == 0.0 {
        return Err(QctrlError::MissingCoupling(alpha, beta));
    }
    certify(zz_word(alpha, beta), graph, alpha, beta)
}

fn zz_word(alpha: usize, beta: usize) -> BracketWord {
    use GeneratorLabel::*;
    let w1 = BracketWord::gen(Drift)
        .bracket(BracketWord::gen(Sigma1(alpha)))
        .bracket(BracketWord::gen(Sigma1(beta)));
    BracketWord::gen(Sigma1(alpha)).bracket(BracketWord::gen(Sigma1(beta)).bracket(w1))
}

/// Given words for `σ3^{(α)}σ3^{(β)}` and `σ3^{(β)}σ3^{(γ)}`, builds
/// `D = [[Z_{αβ}, -iσ1^{(β)}], Z_{βγ}]`,
/// `D′ = 4[[D, -iσ1^{(γ)}], [-iσ2^{(β)}, Z_{βγ}]]` and
/// `D″ = [D′, -iσ2^{(γ)}]`, a multiple of `σ3^{(α)}σ3^{(γ)}`.
fn induced_word(z_ab: BracketWord, z_bc: BracketWord, beta: usize, gamma: usize) -> BracketWord {
    use GeneratorLabel::*;
    let d = z_ab
        .bracket(BracketWord::gen(Sigma1(beta)))
        .bracket(z_bc.clone());
    let d1 = d
        .bracket(BracketWord::gen(Sigma1(gamma)))
        .bracket(BracketWord::gen(Sigma2(beta)).bracket(z_bc))
        .scale(4.0);
    d1.bracket(BracketWord::gen(Sigma2(gamma)))
}

/// The `D → D′ → D″` chain realizing `-iσ3^{(α)}σ3^{(γ)}` through `β`
/// when `J_{αβ}, J_{βγ} ≠ 0` and `J_{αγ} = 0`.
pub fn witness_induced_edge(
    graph: &SpinGraph,
    alpha: usize,
    beta: usize,
    gamma: usize,
) -> Result<Witness> {
    if alpha == beta || beta == gamma || alpha == gamma {
        return Err(QctrlError::InvalidArgument(
            "induced edge needs three distinct nodes".into(),
        ));
    }
    for (a, b) in [(alpha, beta), (beta, gamma)] {
        if graph.coupling(a, b) == 0.0 {
            return Err(QctrlError::MissingCoupling(a, b));
        }
    }
    if graph.coupling(alpha, gamma) != 0.0 {
        return Err(QctrlError::UnexpectedCoupling(alpha, gamma));
    }
    let word = induced_word(zz_word(alpha, beta), zz_word(beta, gamma), beta, gamma);
    certify(word, graph, alpha, gamma)
}

/// Realizes `-iσ3^{(v0)}σ3^{(vk)}` along a path `v0, v1, …, vk` of coupled
/// nodes by repeating the induced-edge chain.
pub fn witness_path(graph: &SpinGraph, path: &[usize]) -> Result<Witness> {
    if path.len() < 2 {
        return Err(QctrlError::InvalidArgument(
            "a path needs at least two nodes".into(),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    if !path.iter().all(|v| seen.insert(*v)) {
        return Err(QctrlError::InvalidArgument(
            "path nodes must be distinct".into(),
        ));
    }
    for w in path.windows(2) {
        if graph.coupling(w[0], w[1]) == 0.0 {
            return Err(QctrlError::Disconnected(w[0], w[1]));
        }
    }
    let mut word = zz_word(path[0], path[1]);
    for w in path[1..].windows(2) {
        word = induced_word(word, zz_word(w[0], w[1]), w[0], w[1]);
    }
    certify(word, graph, path[0], path[path.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{frobenius, ComplexMatrix, C64};

    fn chain(n: usize) -> SpinGraph {
        SpinGraph::with_couplings(n, (1..n).map(|a| (a, a + 1, 1.0))).unwrap()
    }

    #[test]
    fn connectivity_examples() {
        assert!(is_connected(&SpinGraph::two_qubit(1.0).unwrap()).0);
        let single = SpinGraph::with_couplings(3, [(1, 2, 1.0)]).unwrap();
        let (connected, comps) = is_connected(&single);
        assert!(!connected);
        assert_eq!(comps, vec![vec![1, 2], vec![3]]);
        assert!(is_connected(&chain(4)).0);
    }

    #[test]
    fn certification_examples() {
        let two = closure_certify(&SpinGraph::two_qubit(1.0).unwrap()).unwrap();
        assert_eq!((two.closure_dim, two.verdict), (15, true));
        let three = closure_certify(&chain(3)).unwrap();
        assert_eq!((three.closure_dim, three.verdict), (63, true));
        let single =
            closure_certify(&SpinGraph::with_couplings(3, [(1, 2, 1.0)]).unwrap()).unwrap();
        assert_eq!(
            (single.closure_dim, single.predicted_dim, single.verdict),
            (18, 18, false)
        );
    }

    #[test]
    fn weight_decomposition_counts() {
        for n in 1..=5 {
            let dims = identity_weight_dimensions(n);
            for (k, d) in dims.iter().enumerate() {
                assert_eq!(*d, identity_weight_formula(n, k));
            }
            assert_eq!(dims.iter().sum::<usize>(), (1 << (2 * n)) - 1);
        }
    }

    #[test]
    fn lemma_b2_word_isolates_coupling() {
        let g = SpinGraph::two_qubit(0.7).unwrap();
        let w = witness_lemma_b2(&g, 1, 2).unwrap();
        let dense = w.word.evaluate(&g).unwrap().to_dense();
        let want = w.target.to_dense() * C64::from(w.scalar);
        assert!(frobenius(&(dense - want)) < 1e-14);
        // the coupling constant enters the scalar linearly
        let g2 = SpinGraph::two_qubit(1.4).unwrap();
        let w2 = witness_lemma_b2(&g2, 1, 2).unwrap();
        assert!((w2.scalar / w.scalar - 2.0).abs() < 1e-12);
        let tri = SpinGraph::with_couplings(3, [(1, 3, 1.0), (1, 2, 0.5)]).unwrap();
        assert!(witness_lemma_b2(&tri, 1, 3).is_ok());
        assert_eq!(
            witness_lemma_b2(&tri, 2, 3).unwrap_err(),
            QctrlError::MissingCoupling(2, 3)
        );
    }

    #[test]
    fn induced_edge_chain() {
        let g = chain(3);
        let w = witness_induced_edge(&g, 1, 2, 3).unwrap();
        assert!(w.scalar != 0.0);
        let dense = w.word.evaluate(&g).unwrap().to_dense();
        let target: ComplexMatrix = w.target.to_dense() * C64::from(w.scalar);
        assert!(frobenius(&(dense - target)) < 1e-12);
        let split = SpinGraph::with_couplings(3, [(1, 2, 1.0)]).unwrap();
        assert!(witness_induced_edge(&split, 1, 2, 3).is_err());
        let triangle =
            SpinGraph::with_couplings(3, [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)]).unwrap();
        assert_eq!(
            witness_induced_edge(&triangle, 1, 2, 3).unwrap_err(),
            QctrlError::UnexpectedCoupling(1, 3)
        );
    }

    #[test]
    fn path_of_length_three() {
        let g = chain(4);
        let w = witness_path(&g, &[1, 2, 3, 4]).unwrap();
        assert!(w.scalar != 0.0);
        assert!(w.word.depth() > 8);
        assert!(witness_path(&g, &[1, 3]).is_err());
    }
}
