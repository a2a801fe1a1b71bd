//! Linear least-squares fits used to read growth coefficients and
//! convergence orders off sampled data.

use nalgebra::{DMatrix, DVector};

use crate::error::{QctrlError, Result};

/// Least-squares coefficients of `ys ≈ Σ_k c_k t^{p_k}` for the monomial
/// powers `powers`.
pub fn monomial_fit(ts: &[f64], ys: &[f64], powers: &[i32]) -> Result<Vec<f64>> {
    if ts.len() != ys.len() || ts.len() < powers.len() || powers.is_empty() {
        return Err(QctrlError::InvalidArgument(format!(
            "{} samples cannot determine {} coefficients",
            ts.len().min(ys.len()),
            powers.len()
        )));
    }
    // column scaling keeps the normal equations well conditioned
    let scales: Vec<f64> = powers
        .iter()
        .map(|&p| {
            ts.iter()
                .map(|t| t.powi(p).abs())
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE)
        })
        .collect();
    let design = DMatrix::from_fn(ts.len(), powers.len(), |r, c| {
        ts[r].powi(powers[c]) / scales[c]
    });
    let rhs = DVector::from_column_slice(ys);
    let svd = design.svd(true, true);
    let solution = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| QctrlError::Decomposition(e.to_string()))?;
    Ok(solution.iter().zip(&scales).map(|(c, s)| c / s).collect())
}

/// Cubic coefficient of a small-`t` expansion `a + c t³ + d t⁴`, sampled on
/// `ts`. The quartic column absorbs the next order so that it does not leak
/// into `c`.
pub fn cubic_coefficient(ts: &[f64], ys: &[f64]) -> Result<f64> {
    Ok(monomial_fit(ts, ys, &[0, 3, 4])?[1])
}

/// Cubic coefficient of the bare model `a + c t³`.
pub fn pure_cubic_coefficient(ts: &[f64], ys: &[f64]) -> Result<f64> {
    Ok(monomial_fit(ts, ys, &[0, 3])?[1])
}

/// Quadratic coefficient of `b t² + c t³ + d t⁴`.
pub fn quadratic_coefficient(ts: &[f64], ys: &[f64]) -> Result<f64> {
    Ok(monomial_fit(ts, ys, &[2, 3, 4])?[0])
}

/// Slope of `log|y|` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    if lx.iter().chain(&ly).any(|v| !v.is_finite()) {
        return Err(QctrlError::InvalidArgument(
            "log-log fit needs nonzero samples".into(),
        ));
    }
    let coeffs = monomial_fit(&lx, &ly, &[0, 1])?;
    Ok(coeffs[1])
}

/// `n` evenly spaced points covering `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` logarithmically spaced points covering `[a, b]`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}
