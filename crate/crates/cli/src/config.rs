//! JSON experiment configuration.
//!
//! Complex numbers are written `[re, im]`. Qubits are numbered from 1, and
//! the first `ell` qubits form the row block of the state matrix.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use num_complex::Complex64;
use qctrl_core::dynamics::{
    ControlSchedule, ControlSegment, QubitControl, SeriesOptions, Solver, SpinGraph,
};
use qctrl_core::state::{iota, BipartitePartition, StateMatrix};
use qctrl_core::tensor::ComplexMatrix;
use serde::Deserialize;

use crate::error::ConfigError;

/// Default series truncation order.
pub const DEFAULT_ORDER: usize = 3;

/// Default tolerance on `|‖C‖² - 1|` for the initial state.
pub const DEFAULT_NORM_TOL: f64 = 1e-8;

/// Default number of samples written per schedule segment.
pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 100;

/// `[re, im]`.
pub type ComplexPair = [f64; 2];

/// Solver selected in the config or on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Dense matrix exponential.
    Exact,
    /// Truncated power series in the couplings.
    Series,
    /// RK4 reference integrator.
    Oracle,
}

/// One coupling `J_{αβ}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    /// The two qubits, numbered from 1.
    pub pair: [usize; 2],
    /// Coupling strength.
    pub j: f64,
}

/// One constant-control interval.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentEntry {
    /// Length of the interval.
    pub duration: f64,
    /// `[x, y]` per qubit; omitted means no control.
    #[serde(default)]
    pub controls: Vec<[f64; 2]>,
}

/// Initial state given as a state vector or as the state matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialState {
    /// Amplitudes `ψ_k` in computational-basis order.
    Vector(Vec<ComplexPair>),
    /// The `2^ell × 2^m` matrix, row by row.
    Matrix(Vec<Vec<ComplexPair>>),
}

/// The raw file contents.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// `[ell, m]`.
    pub partition: Option<[usize; 2]>,
    /// Number of qubits when no partition is needed.
    pub qubits: Option<usize>,
    /// Nonzero couplings.
    #[serde(default)]
    pub couplings: Vec<CouplingEntry>,
    /// Control schedule.
    #[serde(default)]
    pub schedule: Vec<SegmentEntry>,
    /// Initial state.
    pub initial_state: Option<InitialState>,
    /// Solver.
    pub solver: Option<SolverKind>,
    /// Series order.
    pub order: Option<usize>,
    /// Oracle step.
    pub dt: Option<f64>,
    /// Normalization tolerance for the initial state.
    pub tol: Option<f64>,
    /// Samples per schedule segment.
    pub samples_per_segment: Option<usize>,
    /// Output directory.
    pub output_dir: Option<PathBuf>,
}

/// Solver settings given on the command line; they take precedence.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    /// `--solver`.
    pub solver: Option<SolverKind>,
    /// `--order`.
    pub order: Option<usize>,
    /// `--dt`.
    pub dt: Option<f64>,
    /// `--tol`.
    pub tol: Option<f64>,
}

/// A parsed config file together with its source text.
#[derive(Debug, Clone)]
pub struct Config {
    path: PathBuf,
    source: String,
    raw: RawConfig,
}

/// A fully validated simulation setup.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// Row/column split of the qubits.
    pub partition: BipartitePartition,
    /// Couplings.
    pub graph: SpinGraph,
    /// Controls.
    pub schedule: ControlSchedule,
    /// Initial state.
    pub initial: StateMatrix,
    /// Solver.
    pub solver: Solver,
    /// Series order, also used as the top order by `compare`.
    pub order: usize,
    /// Oracle step, if fixed.
    pub dt: Option<f64>,
    /// Samples per segment.
    pub samples_per_segment: usize,
}

impl Config {
    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(path, source)
    }

    /// Parses config text; `path` is used only in messages.
    pub fn parse(path: &Path, source: String) -> Result<Self, ConfigError> {
        match serde_json::from_str::<RawConfig>(&source) {
            Ok(raw) => Ok(Self {
                path: path.to_path_buf(),
                source,
                raw,
            }),
            Err(e) => Err(ConfigError {
                path: path.to_path_buf(),
                line: Some(e.line()),
                column: Some(e.column()),
                message: e
                    .to_string()
                    .split(" at line ")
                    .next()
                    .unwrap_or_default()
                    .to_string(),
            }),
        }
    }

    /// The parsed contents.
    pub fn raw(&self) -> &RawConfig {
        &self.raw
    }

    /// Error located at the `nth` occurrence of `"key"` in the source.
    fn error_at(&self, key: &str, nth: usize, message: impl Into<String>) -> ConfigError {
        let needle = format!("\"{key}\"");
        let (line, column) = match self.source.match_indices(&needle).nth(nth) {
            Some((offset, _)) => {
                let before = &self.source[..offset];
                let line = before.matches('\n').count() + 1;
                let column = offset - before.rfind('\n').map_or(0, |p| p + 1) + 1;
                (Some(line), Some(column))
            }
            None => (None, None),
        };
        ConfigError {
            path: self.path.clone(),
            line,
            column,
            message: message.into(),
        }
    }

    /// Qubit count from `qubits`, `partition` or the initial state, in that order.
    pub fn qubit_count(&self) -> Result<usize, ConfigError> {
        if let Some(n) = self.raw.qubits {
            if let Some([ell, m]) = self.raw.partition {
                if ell + m != n {
                    return Err(self.error_at(
                        "qubits",
                        0,
                        format!("qubits = {n} but partition has {}", ell + m),
                    ));
                }
            }
            return Ok(n);
        }
        if let Some([ell, m]) = self.raw.partition {
            return Ok(ell + m);
        }
        match &self.raw.initial_state {
            Some(_) => Ok(self.partition()?.n()),
            None => Err(self.error_at(
                "couplings",
                0,
                "cannot determine the qubit count: give `qubits` or `partition`",
            )),
        }
    }

    /// Partition from `partition`, else inferred from the initial state or
    /// `qubits` (row block gets the smaller half).
    pub fn partition(&self) -> Result<BipartitePartition, ConfigError> {
        let split = |n: usize| (n / 2, n - n / 2);
        let (ell, m) = if let Some([ell, m]) = self.raw.partition {
            (ell, m)
        } else if let Some(n) = self.raw.qubits {
            split(n)
        } else {
            match &self.raw.initial_state {
                Some(InitialState::Matrix(rows)) => {
                    let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
                    match (log2_exact(r), log2_exact(c)) {
                        (Some(ell), Some(m)) => (ell, m),
                        _ => {
                            return Err(self.error_at(
                                "matrix",
                                0,
                                format!(
                                    "state matrix is {r}×{c}; both sides must be powers of two"
                                ),
                            ))
                        }
                    }
                }
                Some(InitialState::Vector(v)) => match log2_exact(v.len()) {
                    Some(n) => split(n),
                    None => {
                        return Err(self.error_at(
                            "vector",
                            0,
                            format!("state vector has length {}, not a power of two", v.len()),
                        ))
                    }
                },
                None => return Err(self.error_at("partition", 0, "missing `partition`")),
            }
        };
        BipartitePartition::new(ell, m).map_err(|e| self.error_at("partition", 0, e.to_string()))
    }

    /// Spin graph on `n` qubits.
    pub fn graph(&self, n: usize) -> Result<SpinGraph, ConfigError> {
        let mut graph = SpinGraph::new(n).map_err(|e| self.error_at("qubits", 0, e.to_string()))?;
        let mut seen = BTreeSet::new();
        for (k, c) in self.raw.couplings.iter().enumerate() {
            let [a, b] = c.pair;
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(self.error_at("pair", k, format!("coupling ({a}, {b}) listed twice")));
            }
            graph
                .set(a, b, c.j)
                .map_err(|e| self.error_at("pair", k, e.to_string()))?;
        }
        Ok(graph)
    }

    fn schedule(&self, n: usize) -> Result<ControlSchedule, ConfigError> {
        if self.raw.schedule.is_empty() {
            return Err(self.error_at("schedule", 0, "schedule needs at least one segment"));
        }
        let mut segments = Vec::with_capacity(self.raw.schedule.len());
        for (k, s) in self.raw.schedule.iter().enumerate() {
            let controls = if s.controls.is_empty() {
                vec![QubitControl::default(); n]
            } else {
                s.controls
                    .iter()
                    .map(|[x, y]| QubitControl::new(*x, *y))
                    .collect()
            };
            segments.push(ControlSegment {
                duration: s.duration,
                controls,
            });
            ControlSchedule::new(vec![segments[k].clone()], n).map_err(|e| {
                self.error_at(
                    "duration",
                    k,
                    e.to_string().replace("segment 0", &format!("segment {k}")),
                )
            })?;
        }
        ControlSchedule::new(segments, n).map_err(|e| self.error_at("schedule", 0, e.to_string()))
    }

    fn initial_state(
        &self,
        partition: BipartitePartition,
        tol: f64,
    ) -> Result<StateMatrix, ConfigError> {
        let complex = |[re, im]: ComplexPair| Complex64::new(re, im);
        let state = match &self.raw.initial_state {
            None => return Err(self.error_at("initial_state", 0, "missing `initial_state`")),
            Some(InitialState::Vector(v)) => {
                if v.len() != 1 << partition.n() {
                    return Err(self.error_at(
                        "vector",
                        0,
                        format!(
                            "state vector has length {}, expected {}",
                            v.len(),
                            1usize << partition.n()
                        ),
                    ));
                }
                let psi: Vec<Complex64> = v.iter().copied().map(complex).collect();
                let c =
                    iota(&psi, partition).map_err(|e| self.error_at("vector", 0, e.to_string()))?;
                StateMatrix::with_tolerance(partition, c.into_matrix(), tol)
            }
            Some(InitialState::Matrix(rows)) => {
                let (r, c) = (partition.rows(), partition.cols());
                if rows.len() != r || rows.iter().any(|row| row.len() != c) {
                    return Err(self.error_at(
                        "matrix",
                        0,
                        format!(
                            "state matrix must be {r}×{c} for partition ({}, {})",
                            partition.ell(),
                            partition.m()
                        ),
                    ));
                }
                let m = ComplexMatrix::from_fn(r, c, |i, j| complex(rows[i][j]));
                StateMatrix::with_tolerance(partition, m, tol)
            }
        };
        state.map_err(|e| self.error_at("initial_state", 0, e.to_string()))
    }

    /// Validates everything needed to run a trajectory.
    pub fn experiment(&self, overrides: Overrides) -> Result<Experiment, ConfigError> {
        let partition = self.partition()?;
        let n = self.qubit_count()?;
        if n != partition.n() {
            return Err(self.error_at(
                "partition",
                0,
                format!("partition covers {} qubits, config has {n}", partition.n()),
            ));
        }
        let graph = self.graph(n)?;
        let schedule = self.schedule(n)?;
        let tol = overrides.tol.or(self.raw.tol).unwrap_or(DEFAULT_NORM_TOL);
        if !(tol.is_finite() && tol > 0.0) {
            return Err(self.error_at("tol", 0, format!("tolerance must be positive, got {tol}")));
        }
        let initial = self.initial_state(partition, tol)?;
        let order = overrides.order.or(self.raw.order).unwrap_or(DEFAULT_ORDER);
        let dt = overrides.dt.or(self.raw.dt);
        if let Some(dt) = dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(self.error_at("dt", 0, format!("step must be positive, got {dt}")));
            }
        }
        let solver = match overrides
            .solver
            .or(self.raw.solver)
            .unwrap_or(SolverKind::Exact)
        {
            SolverKind::Exact => Solver::Exact,
            SolverKind::Series => Solver::Series(SeriesOptions {
                order,
                ..SeriesOptions::default()
            }),
            SolverKind::Oracle => Solver::Oracle { dt },
        };
        let samples_per_segment = self
            .raw
            .samples_per_segment
            .unwrap_or(DEFAULT_SAMPLES_PER_SEGMENT);
        if samples_per_segment == 0 {
            return Err(self.error_at(
                "samples_per_segment",
                0,
                "need at least one sample per segment",
            ));
        }
        Ok(Experiment {
            partition,
            graph,
            schedule,
            initial,
            solver,
            order,
            dt,
            samples_per_segment,
        })
    }
}

fn log2_exact(k: usize) -> Option<usize> {
    (k.is_power_of_two() && k > 1).then(|| k.trailing_zeros() as usize)
}
