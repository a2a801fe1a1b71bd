//! Two-qubit entanglement diagnostics under constant local controls.
//!
//! For two qubits `F(C) = |det C|²` on the unit sphere and the concurrence
//! is `√F = |det C|`. The controls are `ξ1 = i x1 σ1 + i y1 σ2` and
//! `ξ2 = i x2 σ1 + i y2 σ2`, entering the equation of motion as
//! `ξ1 C + C ξ2`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    exact_uncontrolled_matrix, propagate_exact, small_time_expansion, Generator, LocalControls,
    QubitControl,
};
use crate::error::{QctrlError, Result};
use crate::fit;
use crate::state::{det2, measure_f_matrix, StateMatrix, TangentVector};
use crate::tensor::{pauli_raw, C64};

/// Tolerance below which `det C` is treated as zero.
pub const DET_TOL: f64 = 1e-14;

/// Tolerance for sign decisions on control combinations.
pub const SIGN_TOL: f64 = 1e-12;

/// Amplitudes of the two-qubit controls.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlParams {
    /// `iσ1` amplitude on the first qubit.
    pub x1: f64,
    /// `iσ2` amplitude on the first qubit.
    pub y1: f64,
    /// `iσ1` amplitude on the second qubit.
    pub x2: f64,
    /// `iσ2` amplitude on the second qubit.
    pub y2: f64,
}

impl ControlParams {
    /// Creates a parameter set.
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    /// Local generators `ξ1`, `ξ2`.
    pub fn local_controls(&self) -> LocalControls {
        LocalControls::two_qubit(
            QubitControl::new(self.x1, self.y1),
            QubitControl::new(self.x2, self.y2),
        )
    }

    /// Per-qubit controls in site order.
    pub fn qubit_controls(&self) -> [QubitControl; 2] {
        [
            QubitControl::new(self.x1, self.y1),
            QubitControl::new(self.x2, self.y2),
        ]
    }

    /// `z1 = x1 + i y1`.
    pub fn z1(&self) -> C64 {
        C64::new(self.x1, self.y1)
    }

    /// `z2 = x2 + i y2`.
    pub fn z2(&self) -> C64 {
        C64::new(self.x2, self.y2)
    }

    /// Control budget `x1² + y1² + x2² + y2²`.
    pub fn budget(&self) -> f64 {
        self.x1 * self.x1 + self.y1 * self.y1 + self.x2 * self.x2 + self.y2 * self.y2
    }

    /// The combination `-x1 y2 + y1 x2` that sets the cubic growth rate.
    pub fn promotion_factor(&self) -> f64 {
        -self.x1 * self.y2 + self.y1 * self.x2
    }

    /// Rescales to the given budget; the zero control is returned unchanged.
    pub fn with_budget(&self, budget: f64) -> Self {
        let b = self.budget();
        if b == 0.0 {
            return *self;
        }
        let s = (budget / b).sqrt();
        Self::new(self.x1 * s, self.y1 * s, self.x2 * s, self.y2 * s)
    }

    fn require_finite(&self) -> Result<()> {
        if [self.x1, self.y1, self.x2, self.y2]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(QctrlError::NonFinite("control parameters".into()))
        }
    }
}

/// Predicted concurrence `base + cubic_coeff · t³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// Time of the estimate.
    pub t: f64,
    /// `√F` of the uncontrolled flow at `t`.
    pub base: f64,
    /// Coefficient of `t³`.
    pub cubic_coeff: f64,
    /// `base + cubic_coeff · t³`.
    pub estimate: f64,
}

/// Effect of a control on entanglement at third order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlEffect {
    /// Increases the concurrence.
    Promoting,
    /// Decreases the concurrence.
    Demoting,
    /// Leaves the concurrence unchanged at third order.
    Neutral,
}

/// Label and rate of a control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlClass {
    /// Sign class.
    pub effect: ControlEffect,
    /// Predicted cubic coefficient of the concurrence.
    pub rate: f64,
}

fn require_two_qubit(state: &StateMatrix) -> Result<()> {
    let p = state.partition();
    if p.is_two_qubit() {
        Ok(())
    } else {
        Err(QctrlError::NotTwoQubit {
            ell: p.ell(),
            m: p.m(),
        })
    }
}

/// Upper bound `D = (|c00 c11| + |c01 c10|)²` on `F` along the
/// uncontrolled flow.
pub fn bound_d(c0: &StateMatrix) -> Result<f64> {
    require_two_qubit(c0)?;
    let c = c0.matrix();
    Ok(((c[(0, 0)] * c[(1, 1)]).norm() + (c[(0, 1)] * c[(1, 0)]).norm()).powi(2))
}

/// `F` along the uncontrolled flow:
/// `|c00 c11|² + |c01 c10|² - 2 Re(e^{-iJt} c00 c̄01 c̄10 c11)`.
pub fn uncontrolled_f_trace(c0: &StateMatrix, j: f64, t: f64) -> Result<f64> {
    require_two_qubit(c0)?;
    let c = c0.matrix();
    let (c00, c01, c10, c11) = (c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]);
    let phase = C64::new(0.0, -j * t).exp();
    Ok((c00 * c11).norm_sqr() + (c01 * c10).norm_sqr()
        - 2.0 * (phase * c00 * c01.conj() * c10.conj() * c11).re)
}

/// Differential of `F` at `C` along `X`: `8 Re(det(Cᴴ) tr(σ2 C σ2 Xᵀ))`
/// with the half-normalized `σ2`.
pub fn df_apply(v: &TangentVector) -> Result<f64> {
    require_two_qubit(&v.base)?;
    Ok(df_matrix(v.base.matrix(), &v.x))
}

fn df_matrix(c: &crate::tensor::ComplexMatrix, x: &crate::tensor::ComplexMatrix) -> f64 {
    let s2 = pauli_raw(2).expect("σ2 is a valid index");
    let t = (&s2 * c * &s2 * x.transpose()).trace();
    8.0 * (det2(c).conj() * t).re
}

/// Predicted cubic coefficient of the concurrence at `Λ = diag(λ1, λ2)`:
/// `J/(2·3!) · (-x1 y2 + y1 x2) · (λ1² - λ2²)`.
pub fn cubic_growth_coeff(params: &ControlParams, lambda1: f64, lambda2: f64, j: f64) -> f64 {
    j / 12.0 * params.promotion_factor() * (lambda1 * lambda1 - lambda2 * lambda2)
}

/// Leading cubic coefficient of the concurrence from the product state
/// `diag(1, 0)`, computed from the exact small-time solution:
/// `J |z1| |z2| / 12`.
pub fn product_state_cubic_coeff(params: &ControlParams, j: f64) -> f64 {
    j / 12.0 * params.z1().norm() * params.z2().norm()
}

/// Labels a control by the sign of `-x1 y2 + y1 x2` and attaches the rate
/// predicted at `Λ = diag(λ1, λ2)`.
pub fn classify_control(
    params: &ControlParams,
    lambda1: f64,
    lambda2: f64,
    j: f64,
) -> Result<ControlClass> {
    params.require_finite()?;
    let s = params.promotion_factor();
    let effect = if s > SIGN_TOL {
        ControlEffect::Promoting
    } else if s < -SIGN_TOL {
        ControlEffect::Demoting
    } else {
        ControlEffect::Neutral
    };
    Ok(ControlClass {
        effect,
        rate: cubic_growth_coeff(params, lambda1, lambda2, j),
    })
}

/// Exemplars of the three control families at a given budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlFamilies {
    /// `x1 = -y2`, `x2 = y1`: maximal promotion.
    pub promoting: ControlParams,
    /// `ξ1 = i a(σ1 - σ2)`, `ξ2 = i a(σ1 + σ2)`: maximal demotion.
    pub demoting: ControlParams,
    /// `ξ1 = i a(σ1 + σ2)`, `ξ2 = i a(σ1 + σ2)`: no third-order change.
    pub neutral: ControlParams,
}

/// Family exemplars with every amplitude equal to `√budget / 2` in size.
pub fn control_families(budget: f64) -> Result<ControlFamilies> {
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(QctrlError::InvalidArgument(format!(
            "budget must be non-negative, got {budget}"
        )));
    }
    let a = budget.sqrt() / 2.0;
    Ok(ControlFamilies {
        promoting: ControlParams::new(a, a, a, -a),
        demoting: ControlParams::new(a, -a, a, a),
        neutral: ControlParams::new(a, a, a, a),
    })
}

/// Phase `θ = arg det C` on the branch `(-π, π]`.
pub fn det_phase(c0: &StateMatrix) -> Result<f64> {
    require_two_qubit(c0)?;
    let d = det2(c0.matrix());
    if d.norm() < DET_TOL {
        return Err(QctrlError::SingularDeterminant);
    }
    let theta = d.arg();
    Ok(if theta == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        theta
    })
}

/// Second-order change of the concurrence predicted for a non-diagonal
/// initial state:
/// `-(Jt²/4) Re(e^{-iθ} (c01 + c10)(z̄1 c00 + z2 c11))`.
pub fn second_order_contribution(
    c0: &StateMatrix,
    params: &ControlParams,
    j: f64,
    t: f64,
) -> Result<f64> {
    let theta = det_phase(c0)?;
    let c = c0.matrix();
    let w = (c[(0, 1)] + c[(1, 0)]) * (params.z1().conj() * c[(0, 0)] + params.z2() * c[(1, 1)]);
    Ok(-(j * t * t / 4.0) * (C64::new(0.0, -theta).exp() * w).re)
}

/// Coefficient of `t²` in the concurrence deviation from the uncontrolled
/// flow, computed from the bracket field `B = [X_{ξ1⊗I}, -X_{iσ3⊗σ3}] +
/// [X_{I⊗ξ2}, -X_{iσ3⊗σ3}]` as `J dF_{C0}(B(C0)) / (4√F(C0))`.
pub fn second_order_rate(c0: &StateMatrix, params: &ControlParams, j: f64) -> Result<f64> {
    require_two_qubit(c0)?;
    let sqrt_f = det2(c0.matrix()).norm();
    if sqrt_f < DET_TOL {
        return Err(QctrlError::SingularDeterminant);
    }
    // unit time scale: the second-order term is (J/2) B(C0)
    let e = small_time_expansion(c0, 1.0, &params.local_controls(), 1.0)?;
    let b = e.second_order * C64::from(2.0);
    Ok(j * df_matrix(c0.matrix(), &b) / (4.0 * sqrt_f))
}

/// Concurrence estimate at diagonal `Λ`:
/// `√F(φ^{Jt}(Λ)) + cubic_growth_coeff · t³`. At `Λ = diag(1, 0)` this is
/// the degenerate limit `(Jt³/12)(-x1 y2 + x2 y1)`. Refuses `Λ = I/√2`,
/// where the bracket terms are horizontal and the expansion does not apply.
pub fn concurrence_estimate(
    lambda: &StateMatrix,
    params: &ControlParams,
    j: f64,
    t: f64,
) -> Result<GrowthEstimate> {
    let (l1, l2) = diagonal_entries(lambda)?;
    if (l1 - l2).abs() <= crate::state::SINGULAR_VALUE_TOL {
        return Err(QctrlError::InvalidArgument(
            "the concurrence expansion does not apply at the maximally entangled state".into(),
        ));
    }
    params.require_finite()?;
    let base = det2(&exact_uncontrolled_matrix(lambda.matrix(), j, t)).norm();
    let cubic_coeff = cubic_growth_coeff(params, l1, l2, j);
    Ok(GrowthEstimate {
        t,
        base,
        cubic_coeff,
        estimate: base + cubic_coeff * t.powi(3),
    })
}

/// Real diagonal entries `(λ1, λ2)` of a diagonal two-qubit state with
/// `λ1 ≥ λ2 ≥ 0`.
pub fn diagonal_entries(lambda: &StateMatrix) -> Result<(f64, f64)> {
    require_two_qubit(lambda)?;
    let c = lambda.matrix();
    let off = c[(0, 1)].norm().max(c[(1, 0)].norm());
    let imag = c[(0, 0)].im.abs().max(c[(1, 1)].im.abs());
    let (l1, l2) = (c[(0, 0)].re, c[(1, 1)].re);
    if off > 1e-12 || imag > 1e-12 || l2 < -1e-12 || l1 < l2 - 1e-12 {
        return Err(QctrlError::InvalidArgument(
            "expected a real diagonal state with λ1 ≥ λ2 ≥ 0".into(),
        ));
    }
    Ok((l1, l2.max(0.0)))
}

/// Concurrence deviation `√F(C(t)) - √F(φ^{Jt}(C0))` of the controlled
/// evolution from the uncontrolled flow, with `C(t)` from the exact
/// propagator.
pub fn sqrt_f_deviation(c0: &StateMatrix, params: &ControlParams, j: f64, t: f64) -> Result<f64> {
    require_two_qubit(c0)?;
    let generator = Generator::two_qubit(j, params.local_controls())?;
    let c = propagate_exact(&generator, c0, t)?;
    let free = exact_uncontrolled_matrix(c0.matrix(), j, t);
    Ok(measure_f_matrix(c.matrix()).max(0.0).sqrt() - measure_f_matrix(&free).max(0.0).sqrt())
}

/// Fitted growth coefficients of the concurrence deviation over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedGrowth {
    /// `t³` coefficient of the model `a + c t³ + d t⁴`.
    pub cubic: f64,
    /// `t³` coefficient of the bare model `a + c t³`.
    pub pure_cubic: f64,
    /// `t²` coefficient of the model `b t² + c t³ + d t⁴`.
    pub quadratic: f64,
}

/// Samples [`sqrt_f_deviation`] at `samples` evenly spaced times in
/// `[t_min, t_max]` and fits the growth models.
pub fn fit_growth(
    c0: &StateMatrix,
    params: &ControlParams,
    j: f64,
    (t_min, t_max): (f64, f64),
    samples: usize,
) -> Result<FittedGrowth> {
    let ts = fit::linspace(t_min, t_max, samples);
    let ys = ts
        .iter()
        .map(|&t| sqrt_f_deviation(c0, params, j, t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(FittedGrowth {
        cubic: fit::cubic_coefficient(&ts, &ys)?,
        pure_cubic: fit::pure_cubic_coefficient(&ts, &ys)?,
        quadratic: fit::quadratic_coefficient(&ts, &ys)?,
    })
}
