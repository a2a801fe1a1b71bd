//! Lie closure of a set of Pauli sums.
//!
//! The closure keeps two parallel lists: the raw bracket results (unit
//! normalized, used to generate further brackets) and a basis of their span
//! in reduced row echelon form over the `4^n` Pauli coordinates (used for the
//! independence test). Every basis row carries a pivot coordinate at which
//! it equals one and all other rows vanish, so reducing a candidate only
//! touches the rows whose pivots lie in the candidate's support. Each round
//! brackets every element added in the previous round against every element
//! of the current basis; the closure stops when a round adds nothing or the
//! span reaches `su(2^n)`.

use crate::error::{QctrlError, Result};
use crate::lie::pauli::PauliSum;
use crate::par::{self, Execution};

/// A candidate direction is accepted when the largest entry of its reduced
/// form, relative to the candidate's norm, exceeds this threshold.
pub const INDEPENDENCE_TOL: f64 = 1e-9;

/// Number of bracket pairs evaluated per parallel batch.
const BATCH: usize = 512;

/// Result of a closure computation.
#[derive(Debug, Clone)]
pub struct ClosureResult {
    /// Real dimension of the generated Lie algebra.
    pub dimension: usize,
    /// Spanning set (linearly independent, unit norm).
    pub basis: Vec<PauliSum>,
    /// Number of bracketing rounds performed.
    pub rounds: usize,
}

struct Span {
    full: usize,
    rows: Vec<(usize, Vec<f64>)>,
    pivot_row: Vec<Option<usize>>,
}

impl Span {
    fn new(coords: usize) -> Self {
        Self {
            full: coords - 1,
            rows: Vec::new(),
            pivot_row: vec![None; coords],
        }
    }

    /// Reduced form of the sparse vector `terms`, or `None` when it already
    /// lies in the span.
    fn reduce<I: IntoIterator<Item = (usize, f64)>>(&self, terms: I) -> Option<Vec<f64>> {
        let mut v = vec![0.0; self.pivot_row.len()];
        let mut pivots = Vec::new();
        for (k, c) in terms {
            v[k] += c;
            if let Some(r) = self.pivot_row[k] {
                pivots.push(r);
            }
        }
        for r in pivots {
            let (p, row) = &self.rows[r];
            let c = v[*p];
            if c != 0.0 {
                v.iter_mut().zip(row).for_each(|(x, y)| *x -= c * y);
            }
        }
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (max > INDEPENDENCE_TOL).then_some(v)
    }

    /// Adds a reduced vector as a new row and clears its pivot from the
    /// other rows.
    fn insert(&mut self, mut v: Vec<f64>) {
        let (p, &pv) = v
            .iter()
            .enumerate()
            .filter(|(k, _)| self.pivot_row[*k].is_none())
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("reduced vector has a free coordinate");
        v.iter_mut().for_each(|x| *x /= pv);
        v[p] = 1.0;
        for (k, &pr) in self.pivot_row.iter().enumerate() {
            if pr.is_some() {
                v[k] = 0.0;
            }
        }
        for (_, row) in &mut self.rows {
            let c = row[p];
            if c != 0.0 {
                row.iter_mut().zip(&v).for_each(|(x, y)| *x -= c * y);
                row[p] = 0.0;
            }
        }
        self.pivot_row[p] = Some(self.rows.len());
        self.rows.push((p, v));
    }

    /// Reduces and inserts; returns whether the vector was new.
    fn try_insert<I: IntoIterator<Item = (usize, f64)>>(&mut self, terms: I) -> bool {
        match self.reduce(terms) {
            Some(v) => {
                self.insert(v);
                true
            }
            None => false,
        }
    }

    fn dimension(&self) -> usize {
        self.rows.len()
    }

    fn is_full(&self) -> bool {
        self.rows.len() >= self.full
    }
}

fn unit(s: &PauliSum) -> Option<PauliSum> {
    let n = s.norm();
    (n > 0.0).then(|| s.scale(1.0 / n))
}

/// Lie closure on the parallel pool; see [`lie_closure_with`].
pub fn lie_closure(generators: &[PauliSum], n: usize, max_iter: usize) -> Result<ClosureResult> {
    lie_closure_with(generators, n, max_iter, Execution::Parallel)
}

/// Computes the real dimension and a spanning set of the Lie algebra
/// generated by `generators` (real combinations of `i·(Pauli string)` on
/// `n` qubits). Fails if the span is still growing after `max_iter`
/// bracketing rounds.
pub fn lie_closure_with(
    generators: &[PauliSum],
    n: usize,
    max_iter: usize,
    exec: Execution,
) -> Result<ClosureResult> {
    if n == 0 || n > 8 {
        return Err(QctrlError::InvalidArgument(format!(
            "closure supports 1..=8 qubits, got {n}"
        )));
    }
    if let Some(g) = generators.iter().find(|g| g.n() != n) {
        return Err(QctrlError::DimensionMismatch(format!(
            "generator on {} qubits in a closure on {n}",
            g.n()
        )));
    }
    let mut span = Span::new(1usize << (2 * n));
    let mut elements: Vec<PauliSum> = Vec::new();
    for g in generators {
        if let Some(u) = unit(g) {
            if span.try_insert(sparse(&u)) {
                elements.push(u);
            }
        }
    }
    let mut frontier_start = 0;
    let mut rounds = 0;
    while frontier_start < elements.len() && !span.is_full() {
        if rounds == max_iter {
            return Err(QctrlError::IterationLimit(max_iter));
        }
        rounds += 1;
        let round_end = elements.len();
        let pairs: Vec<(usize, usize)> = (frontier_start..round_end)
            .flat_map(|a| {
                (0..round_end)
                    .filter(move |&b| b < frontier_start || b > a)
                    .map(move |b| (a, b))
            })
            .collect();
        for chunk in pairs.chunks(BATCH) {
            if span.is_full() {
                break;
            }
            let (snapshot, elems) = (&span, &elements);
            let candidates: Vec<Option<PauliSum>> = par::map(exec, chunk, |&(a, b)| {
                let u = unit(&elems[a].bracket(&elems[b]).ok()?)?;
                snapshot.reduce(sparse(&u)).map(|_| u)
            });
            for u in candidates.into_iter().flatten() {
                if span.is_full() {
                    break;
                }
                if span.try_insert(sparse(&u)) {
                    elements.push(u);
                }
            }
        }
        frontier_start = round_end;
    }
    Ok(ClosureResult {
        dimension: span.dimension(),
        basis: elements,
        rounds,
    })
}

fn sparse(s: &PauliSum) -> impl Iterator<Item = (usize, f64)> + '_ {
    s.terms().map(|(k, c)| (k as usize, c))
}
