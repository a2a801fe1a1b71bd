//! Real combinations of Pauli strings `i·σ_{j1}⊗⋯⊗σ_{jn}`.
//!
//! Strings are packed two bits per site into a `u32` key, site 1 in the
//! most significant position, so the key of a string equals its index in
//! the lexicographic enumeration of `{0,1,2,3}^n`. Products of single-site
//! factors follow the one-half normalization: `σj σj = I/4` and
//! `σj σk = -(i/2) ε_jkl σl` for `j ≠ k`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{QctrlError, Result};
use crate::tensor::{kron_all, pauli_raw, ComplexMatrix, C64, I};

/// Largest supported register size.
pub const MAX_QUBITS: usize = 15;

/// A Pauli string with a real coefficient, standing for
/// `coeff · i·σ_{j1}⊗⋯⊗σ_{jn}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    indices: Vec<u8>,
    /// Real coefficient of the basis element.
    pub coeff: f64,
}

impl PauliString {
    /// Validates the indices.
    pub fn new(indices: Vec<u8>, coeff: f64) -> Result<Self> {
        if indices.is_empty() || indices.len() > MAX_QUBITS {
            return Err(QctrlError::InvalidArgument(format!(
                "Pauli strings need 1..={MAX_QUBITS} sites, got {}",
                indices.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j > 3) {
            return Err(QctrlError::InvalidPauliIndex(bad));
        }
        Ok(Self { indices, coeff })
    }

    /// Single-site factor `σ_j` at `site` (1-based) of an `n`-qubit register.
    pub fn site(j: u8, site: usize, n: usize, coeff: f64) -> Result<Self> {
        if site == 0 || site > n {
            return Err(QctrlError::SiteOutOfRange { site, qubits: n });
        }
        let mut idx = vec![0u8; n];
        idx[site - 1] = j;
        Self::new(idx, coeff)
    }

    /// Indices, site 1 first.
    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// Always false; strings have at least one site.
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Packed key.
    pub fn key(&self) -> u32 {
        self.indices
            .iter()
            .fold(0u32, |k, &j| (k << 2) | u32::from(j))
    }

    /// Rebuilds a string from its key.
    pub fn from_key(key: u32, n: usize, coeff: f64) -> Self {
        let indices = (0..n)
            .map(|s| ((key >> (2 * (n - 1 - s))) & 3) as u8)
            .collect();
        Self { indices, coeff }
    }

    /// Dense realization `coeff · i·σ_{j1}⊗⋯⊗σ_{jn}`.
    pub fn to_dense(&self) -> ComplexMatrix {
        let factors: Vec<ComplexMatrix> = self
            .indices
            .iter()
            .map(|&j| pauli_raw(j).expect("validated index"))
            .collect();
        kron_all(&factors).map(|z| z * I * self.coeff)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self
            .indices
            .iter()
            .map(|&j| {
                if j == 0 {
                    "I".to_string()
                } else {
                    format!("σ{j}")
                }
            })
            .collect();
        write!(f, "{:+}·i{}", self.coeff, body.join("⊗"))
    }
}

/// Product of single-site factors: `σ_a σ_b = phase · σ_c`.
#[inline]
fn site_product(a: u8, b: u8) -> (C64, u8) {
    match (a, b) {
        (0, x) | (x, 0) => (C64::new(1.0, 0.0), x),
        (x, y) if x == y => (C64::new(0.25, 0.0), 0),
        (1, 2) => (C64::new(0.0, -0.5), 3),
        (2, 1) => (C64::new(0.0, 0.5), 3),
        (2, 3) => (C64::new(0.0, -0.5), 1),
        (3, 2) => (C64::new(0.0, 0.5), 1),
        (3, 1) => (C64::new(0.0, -0.5), 2),
        _ => (C64::new(0.0, 0.5), 2), // (1, 3)
    }
}

/// Product of packed strings: `P Q = phase · R`.
#[inline]
pub(crate) fn key_product(p: u32, q: u32, n: usize) -> (C64, u32) {
    let mut phase = C64::new(1.0, 0.0);
    let mut key = 0u32;
    for s in (0..n).rev() {
        let a = ((p >> (2 * s)) & 3) as u8;
        let b = ((q >> (2 * s)) & 3) as u8;
        let (ph, c) = site_product(a, b);
        phase *= ph;
        key = (key << 2) | u32::from(c);
    }
    (phase, key)
}

/// Structure constant of `[i·P, i·Q] = k · i·R`; `None` when `P` and `Q`
/// commute.
#[inline]
pub(crate) fn key_bracket(p: u32, q: u32, n: usize) -> Option<(f64, u32)> {
    let (phase_pq, r) = key_product(p, q, n);
    let (phase_qp, _) = key_product(q, p, n);
    let diff = phase_pq - phase_qp;
    if diff.norm() < 1e-300 {
        return None;
    }
    // [iP, iQ] = -(PQ - QP) = -diff·R = (i·diff)·(iR)
    let k = I * diff;
    Some((k.re, r))
}

/// Expansion of `[i·P, i·Q]` in the `i·(Pauli string)` basis: empty when
/// the strings commute, otherwise a single string.
pub fn pauli_string_bracket(p: &PauliString, q: &PauliString) -> Result<Vec<PauliString>> {
    if p.len() != q.len() {
        return Err(QctrlError::DimensionMismatch(format!(
            "Pauli strings of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let n = p.len();
    Ok(match key_bracket(p.key(), q.key(), n) {
        None => Vec::new(),
        Some((k, r)) => vec![PauliString::from_key(r, n, k * p.coeff * q.coeff)],
    })
}

/// A sparse real combination of `i·(Pauli string)` basis elements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PauliSum {
    n: usize,
    terms: BTreeMap<u32, f64>,
}

impl PauliSum {
    /// Zero element on `n` qubits.
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    /// Builds a sum from strings of a common length.
    pub fn from_strings(n: usize, strings: &[PauliString]) -> Result<Self> {
        let mut out = Self::zero(n);
        for s in strings {
            if s.len() != n {
                return Err(QctrlError::DimensionMismatch(format!(
                    "string of length {} in a sum on {n} qubits",
                    s.len()
                )));
            }
            out.add_term(s.key(), s.coeff);
        }
        Ok(out)
    }

    /// Single-string sum.
    pub fn from_string(s: &PauliString) -> Self {
        let mut out = Self::zero(s.len());
        out.add_term(s.key(), s.coeff);
        out
    }

    /// Builds a sum from packed keys.
    pub fn from_keys(n: usize, terms: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut out = Self::zero(n);
        for (k, c) in terms {
            out.add_term(k, c);
        }
        out
    }

    /// Qubit count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Terms as (key, coefficient), sorted by key.
    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.terms.iter().map(|(&k, &c)| (k, c))
    }

    /// Number of nonzero terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Whether the sum has no terms.
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms as Pauli strings.
    pub fn strings(&self) -> Vec<PauliString> {
        self.terms()
            .map(|(k, c)| PauliString::from_key(k, self.n, c))
            .collect()
    }

    /// Adds `coeff` to the coefficient of `key`, removing exact zeros.
    pub fn add_term(&mut self, key: u32, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(key).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&key);
        }
    }

    /// Scales every coefficient.
    pub fn scale(&self, s: f64) -> Self {
        Self::from_keys(self.n, self.terms().map(|(k, c)| (k, c * s)))
    }

    /// Sum of two elements.
    pub fn add(&self, other: &PauliSum) -> Self {
        let mut out = self.clone();
        for (k, c) in other.terms() {
            out.add_term(k, c);
        }
        out
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Commutator `[self, other]` in Pauli coordinates.
    pub fn bracket(&self, other: &PauliSum) -> Result<PauliSum> {
        if self.n != other.n {
            return Err(QctrlError::DimensionMismatch(format!(
                "sums on {} and {} qubits",
                self.n, other.n
            )));
        }
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (p, cp) in self.terms() {
            for (q, cq) in other.terms() {
                if let Some((k, r)) = key_bracket(p, q, self.n) {
                    *acc.entry(r).or_insert(0.0) += k * cp * cq;
                }
            }
        }
        let scale = acc.values().fold(0.0f64, |m, c| m.max(c.abs()));
        Ok(Self {
            n: self.n,
            terms: acc
                .into_iter()
                .filter(|(_, c)| c.abs() > 1e-15 * scale)
                .collect(),
        })
    }

    /// Dense coordinate vector of length `4^n` indexed by key.
    pub fn to_coordinates(&self) -> Vec<f64> {
        let mut v = vec![0.0; 1usize << (2 * self.n)];
        for (k, c) in self.terms() {
            v[k as usize] = c;
        }
        v
    }

    /// Dense `2^n × 2^n` realization.
    pub fn to_dense(&self) -> ComplexMatrix {
        let dim = 1usize << self.n;
        self.strings()
            .iter()
            .fold(ComplexMatrix::zeros(dim, dim), |acc, s| acc + s.to_dense())
    }

    /// Coefficient `r` with `self ≈ r · other`, if the two are proportional
    /// within `tol` (relative to the norm of `self`).
    pub fn proportionality(&self, other: &PauliSum, tol: f64) -> Option<f64> {
        let on = other.norm();
        if on == 0.0 || self.n != other.n {
            return None;
        }
        let dot: f64 = self
            .terms()
            .map(|(k, c)| c * other.terms.get(&k).copied().unwrap_or(0.0))
            .sum();
        let r = dot / (on * on);
        let residual = self.add(&other.scale(-r)).norm();
        (residual <= tol * self.norm().max(f64::MIN_POSITIVE) && r != 0.0).then_some(r)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self.strings().iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}
