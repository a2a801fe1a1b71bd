//! The five CLI verbs.

use std::fs;
use std::path::{Path, PathBuf};

use qctrl_core::controllability::{closure_certify, witness_lemma_b2, ControllabilityReport};
use qctrl_core::dynamics::{
    continue_schedule, solve_constant, DriftFactorization, Generator, LocalControls, OracleLog,
    SeriesOptions, Solver, SpinGraph, TrajectoryRecord,
};
use qctrl_core::entanglement::{classify_control, control_families, ControlEffect, ControlParams};
use qctrl_core::lie::{appendix_a_table, render_table};
use qctrl_core::state::{stratum_from_lambdas, StateMatrix};
use qctrl_core::tensor::frobenius;
use serde::Serialize;

use crate::config::{Config, Experiment};
use crate::error::CliError;

/// The checked-in reference bracket table.
pub const GOLDEN_TABLE: &str = include_str!("../golden/appendix_a.txt");

/// Output directory used when neither `--out` nor `output_dir` is given.
pub const DEFAULT_OUT_DIR: &str = "qctrl-out";

/// Tolerance used to classify the stratum of the optimal-control input.
const STRATUM_TOL: f64 = 1e-10;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String, CliError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_file(path, &text)?;
    Ok(text)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Output {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    write_file(path, &String::from_utf8_lossy(&bytes))
}

/// Output directory from the flag, then the config, then the default.
pub fn output_dir(flag: Option<&Path>, config: Option<&Config>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.and_then(|c| c.raw().output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// A change of stratum between consecutive samples.
#[derive(Debug, Clone, Serialize)]
pub struct StratumChange {
    /// Time of the first sample in the new stratum.
    pub t: f64,
    /// Previous label.
    pub from: String,
    /// New label.
    pub to: String,
}

/// Summary written next to the trajectory CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    /// Solver used.
    pub solver: Solver,
    /// `[ell, m]`.
    pub partition: [usize; 2],
    /// Number of samples including `t = 0`.
    pub samples: usize,
    /// Final time.
    pub final_time: f64,
    /// `F` at the final time.
    pub final_f: f64,
    /// Largest sampled `F`.
    pub max_f: f64,
    /// Time of the largest sampled `F`.
    pub t_at_max_f: f64,
    /// Stratum at the final time.
    pub final_stratum: String,
    /// Every change of stratum along the trajectory.
    pub stratum_changes: Vec<StratumChange>,
    /// Oracle diagnostics; zero unless the oracle ran.
    pub oracle: OracleLog,
}

fn summarize(exp: &Experiment, record: &TrajectoryRecord) -> SimulationSummary {
    let samples = record.samples();
    let last = samples
        .last()
        .expect("a trajectory always holds its initial sample");
    let peak = samples
        .iter()
        .max_by(|a, b| a.f.total_cmp(&b.f))
        .expect("a trajectory always holds its initial sample");
    let stratum_changes = samples
        .windows(2)
        .filter(|w| w[0].stratum != w[1].stratum)
        .map(|w| StratumChange {
            t: w[1].t,
            from: w[0].stratum.clone(),
            to: w[1].stratum.clone(),
        })
        .collect();
    SimulationSummary {
        solver: exp.solver,
        partition: [exp.partition.ell(), exp.partition.m()],
        samples: samples.len(),
        final_time: last.t,
        final_f: last.f,
        max_f: peak.f,
        t_at_max_f: peak.t,
        final_stratum: last.stratum.clone(),
        stratum_changes,
        oracle: record.oracle_log(),
    }
}

/// Runs the schedule and writes `trajectory.csv` and `summary.json`.
pub fn simulate(exp: &Experiment, out: &Path) -> Result<String, CliError> {
    let record = continue_schedule(
        &exp.graph,
        exp.partition,
        &exp.schedule,
        &exp.initial,
        exp.solver,
        exp.samples_per_segment,
    )?;
    write_csv(
        &out.join("trajectory.csv"),
        &TrajectoryRecord::csv_header(exp.partition),
        &record.csv_rows(),
    )?;
    write_json(&out.join("summary.json"), &summarize(exp, &record))
}

/// A certified edge with its bracket word.
#[derive(Debug, Clone, Serialize)]
pub struct EdgeWitness {
    /// The coupled qubits.
    pub pair: [usize; 2],
    /// Bracket word of the generators.
    pub word: String,
    /// `r` with `word = r · (-iσ3σ3)`.
    pub scalar: f64,
}

/// Controllability verdict with a bracket transcript.
#[derive(Debug, Clone, Serialize)]
pub struct ControllabilityOutput {
    /// Closure data.
    #[serde(flatten)]
    pub report: ControllabilityReport,
    /// One witness per coupling.
    pub witnesses: Vec<EdgeWitness>,
}

/// Certifies the spin graph. Returns the JSON report and the verdict.
pub fn controllability(
    config: &Config,
    out: Option<&Path>,
) -> Result<(String, ControllabilityReport), CliError> {
    let n = config.qubit_count()?;
    let graph = config.graph(n)?;
    let report = closure_certify(&graph)?;
    let mut witnesses = Vec::new();
    for (a, b, _) in graph.couplings() {
        let w = witness_lemma_b2(&graph, a, b)?;
        witnesses.push(EdgeWitness {
            pair: [a, b],
            word: w.word.to_string(),
            scalar: w.scalar,
        });
    }
    let output = ControllabilityOutput {
        report: report.clone(),
        witnesses,
    };
    let text = match out {
        Some(dir) => write_json(&dir.join("controllability.json"), &output)?,
        None => serde_json::to_string_pretty(&output)? + "\n",
    };
    Ok((text, report))
}

/// Lines where two texts differ, as `(line, expected, actual)`.
pub fn diff_lines(expected: &str, actual: &str) -> Vec<(usize, String, String)> {
    let (e, a): (Vec<&str>, Vec<&str>) = (expected.lines().collect(), actual.lines().collect());
    (0..e.len().max(a.len()))
        .filter_map(|k| {
            let (x, y) = (
                e.get(k).copied().unwrap_or(""),
                a.get(k).copied().unwrap_or(""),
            );
            (x != y).then(|| (k + 1, x.to_string(), y.to_string()))
        })
        .collect()
}

/// Computes the bracket table and checks it against the golden file.
pub fn brackets(out: Option<&Path>) -> Result<String, CliError> {
    let table = render_table(&appendix_a_table()?);
    if let Some(dir) = out {
        write_file(&dir.join("appendix_a.txt"), &table)?;
    }
    let diffs = diff_lines(GOLDEN_TABLE, &table);
    for (line, want, got) in &diffs {
        eprintln!("line {line}: expected `{want}`, got `{got}`");
    }
    if diffs.is_empty() {
        Ok(table)
    } else {
        Err(CliError::GoldenMismatch(diffs.len()))
    }
}

/// Residual of one truncation order against the reference solution.
#[derive(Debug, Clone, Serialize)]
pub struct OrderResidual {
    /// Series order.
    pub order: usize,
    /// `‖C_series(T) - C_ref(T)‖_F` at the configured couplings.
    pub residual: f64,
    /// The same with every coupling halved.
    pub residual_half: f64,
    /// `log2(residual / residual_half)`, the empirical order in `J`.
    pub slope: f64,
}

/// Series truncation study.
#[derive(Debug, Clone, Serialize)]
pub struct CompareOutput {
    /// Final time.
    pub final_time: f64,
    /// One entry per order `0..=N`.
    pub orders: Vec<OrderResidual>,
    /// `‖C_oracle(T) - C_exact(T)‖_F`, a check on the reference.
    pub oracle_deviation: f64,
    /// Oracle diagnostics.
    pub oracle: OracleLog,
}

fn final_state(
    exp: &Experiment,
    graph: &SpinGraph,
    solver: Solver,
) -> Result<(StateMatrix, OracleLog), CliError> {
    let drift = DriftFactorization::from_graph(graph, exp.partition)?;
    let mut state = exp.initial.clone();
    let mut log = OracleLog::default();
    for segment in exp.schedule.segments() {
        let controls = LocalControls::from_controls(&segment.controls, exp.partition)?;
        let generator = Generator::new(drift.clone(), controls)?;
        let (next, step) = solve_constant(&generator, &state, segment.duration, solver)?;
        log.steps += step.steps;
        log.dt = log.dt.max(step.dt);
        log.renormalizations += step.renormalizations;
        log.max_correction = log.max_correction.max(step.max_correction);
        state = next;
    }
    Ok((state, log))
}

/// Compares series orders `0..=N` against the exact propagator at the final
/// time, at the configured and at halved couplings, and writes `compare.csv`
/// and `compare.json`.
pub fn compare(exp: &Experiment, out: &Path) -> Result<String, CliError> {
    let half = exp.graph.rescaled(|_, _| 0.5)?;
    let (exact, _) = final_state(exp, &exp.graph, Solver::Exact)?;
    let (exact_half, _) = final_state(exp, &half, Solver::Exact)?;
    let (oracle, oracle_log) = final_state(exp, &exp.graph, Solver::Oracle { dt: exp.dt })?;
    let mut orders = Vec::with_capacity(exp.order + 1);
    for order in 0..=exp.order {
        let solver = Solver::Series(SeriesOptions {
            order,
            ..SeriesOptions::default()
        });
        let (full, _) = final_state(exp, &exp.graph, solver)?;
        let (halved, _) = final_state(exp, &half, solver)?;
        let residual = frobenius(&(full.matrix() - exact.matrix()));
        let residual_half = frobenius(&(halved.matrix() - exact_half.matrix()));
        orders.push(OrderResidual {
            order,
            residual,
            residual_half,
            slope: (residual / residual_half).log2(),
        });
    }
    let output = CompareOutput {
        final_time: exp.schedule.duration(),
        orders,
        oracle_deviation: frobenius(&(oracle.matrix() - exact.matrix())),
        oracle: oracle_log,
    };
    let header: Vec<String> = ["order", "residual", "residual_half", "slope"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = output
        .orders
        .iter()
        .map(|r| {
            vec![
                r.order.to_string(),
                r.residual.to_string(),
                r.residual_half.to_string(),
                r.slope.to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("compare.csv"), &header, &rows)?;
    write_json(&out.join("compare.json"), &output)
}

/// One control family at the requested budget.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    /// Control amplitudes.
    pub params: ControlParams,
    /// Predicted sign class.
    pub effect: ControlEffect,
    /// Predicted cubic coefficient of the concurrence.
    pub rate: f64,
}

/// Third-order control design at a Schmidt point.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalControlOutput {
    /// `[λ1, λ2]`, descending.
    pub lambda: [f64; 2],
    /// Stratum of `diag(λ1, λ2)`.
    pub stratum: String,
    /// `x1² + y1² + x2² + y2²`.
    pub budget: f64,
    /// Coupling `J`.
    pub coupling: f64,
    /// Family with the largest rate.
    pub promoting: FamilyReport,
    /// Family with the most negative rate.
    pub demoting: FamilyReport,
    /// Family with zero rate.
    pub neutral: FamilyReport,
}

/// Reports the promoting, demoting and neutral families at `diag(λ1, λ2)`.
pub fn optimal_control(
    lambda1: f64,
    lambda2: f64,
    budget: f64,
    coupling: f64,
    tol: f64,
    out: Option<&Path>,
) -> Result<String, CliError> {
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
        return Err(CliError::Usage(format!(
            "Schmidt coefficients must be non-negative, got ({lambda1}, {lambda2})"
        )));
    }
    let norm = lambda1 * lambda1 + lambda2 * lambda2;
    if (norm - 1.0).abs() > tol {
        return Err(CliError::Usage(format!(
            "λ1² + λ2² = {norm}, expected 1 within {tol}"
        )));
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(CliError::Usage(format!(
            "budget must be non-negative, got {budget}"
        )));
    }
    if !coupling.is_finite() {
        return Err(CliError::Usage(format!(
            "coupling must be finite, got {coupling}"
        )));
    }
    let (l1, l2) = (lambda1.max(lambda2), lambda1.min(lambda2));
    let families = control_families(budget)?;
    let report = |params: ControlParams| -> Result<FamilyReport, CliError> {
        let class = classify_control(&params, l1, l2, coupling)?;
        Ok(FamilyReport {
            params,
            effect: class.effect,
            rate: class.rate,
        })
    };
    let output = OptimalControlOutput {
        lambda: [l1, l2],
        stratum: stratum_from_lambdas(l1, l2, STRATUM_TOL).to_string(),
        budget,
        coupling,
        promoting: report(families.promoting)?,
        demoting: report(families.demoting)?,
        neutral: report(families.neutral)?,
    };
    match out {
        Some(dir) => write_json(&dir.join("optimal_control.json"), &output),
        None => Ok(serde_json::to_string_pretty(&output)? + "\n"),
    }
}
