//! Model ingredients: baseline intensity, excitation kernel and nonlinearity.
//!
//! The conditional intensity given jump times `t_1 < ... < t_n` is
//!
//! ```text
//! λ*(s) = λ_s + γ( Σ_{t_i < s} μ(s - t_i) )
//! ```
//!
//! and a model is admissible when `λ ≥ λ_* > 0`, `μ ≥ 0` is C¹ and integrable,
//! `γ(0) = 0` with Lipschitz constant `a`, and `a ‖μ‖₁ < 1`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Grid resolution used to certify bounds at construction.
const BOUND_GRID: usize = 10_000;
/// Safety factor applied to grid-certified upper bounds.
const BOUND_SAFETY: f64 = 1.01;

// ---------------------------------------------------------------------------
// Baseline
// ---------------------------------------------------------------------------

/// Deterministic baseline intensity `λ_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Baseline {
    Constant {
        rate: f64,
    },
    Affine {
        intercept: f64,
        slope: f64,
    },
    Sinusoidal {
        level: f64,
        amplitude: f64,
        period: f64,
    },
}

impl Baseline {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Baseline::Constant { rate } => rate,
            Baseline::Affine { intercept, slope } => intercept + slope * t,
            Baseline::Sinusoidal {
                level,
                amplitude,
                period,
            } => level + amplitude * (std::f64::consts::TAU * t / period).sin(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Baseline::Constant { .. } => 0.0,
            Baseline::Affine { slope, .. } => slope,
            Baseline::Sinusoidal {
                amplitude, period, ..
            } => {
                let w = std::f64::consts::TAU / period;
                amplitude * w * (w * t).cos()
            }
        }
    }

    /// `∫₀ᵗ λ_s ds`.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            Baseline::Constant { rate } => rate * t,
            Baseline::Affine { intercept, slope } => intercept * t + 0.5 * slope * t * t,
            Baseline::Sinusoidal {
                level,
                amplitude,
                period,
            } => {
                let w = std::f64::consts::TAU / period;
                level * t + amplitude / w * (1.0 - (w * t).cos())
            }
        }
    }

    /// Global lower bound `λ_*` on `[0, ∞)`.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            Baseline::Constant { rate } => rate,
            Baseline::Affine { intercept, slope } => {
                if slope >= 0.0 {
                    intercept
                } else {
                    f64::NEG_INFINITY
                }
            }
            Baseline::Sinusoidal {
                level, amplitude, ..
            } => level - amplitude.abs(),
        }
    }

    /// Certified upper bound `λ^T` on `[0, horizon]`: the larger of a
    /// 10 000-interval grid maximum and the family's exact maximum, times 1.01.
    pub fn upper_bound(&self, horizon: f64) -> f64 {
        let grid_max = (0..=BOUND_GRID)
            .map(|k| self.value(horizon * k as f64 / BOUND_GRID as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        let exact = match *self {
            Baseline::Constant { rate } => rate,
            Baseline::Affine { intercept, slope } => intercept.max(intercept + slope * horizon),
            Baseline::Sinusoidal {
                level, amplitude, ..
            } => level + amplitude.abs(),
        };
        grid_max.max(exact) * BOUND_SAFETY
    }

    fn well_formed(&self) -> bool {
        match *self {
            Baseline::Constant { rate } => rate.is_finite(),
            Baseline::Affine { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            Baseline::Sinusoidal {
                level,
                amplitude,
                period,
            } => level.is_finite() && amplitude.is_finite() && period.is_finite() && period > 0.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Kernel
// ---------------------------------------------------------------------------

/// Excitation kernel `μ`.
#[derive(Clone)]
pub enum Kernel {
    /// `μ(t) = α e^{-βt}`.
    Exponential {
        alpha: f64,
        beta: f64,
    },
    Custom(CustomKernel),
}

/// User-supplied kernel. The antiderivative and norms must be exact;
/// nothing is integrated numerically.
#[derive(Clone)]
pub struct CustomKernel {
    pub value: ScalarFn,
    pub derivative: ScalarFn,
    /// `μ̂(t) = ∫₀ᵗ μ`.
    pub integral: ScalarFn,
    pub l1_norm: f64,
    pub sup_norm: f64,
    pub sup_derivative: f64,
    /// Set when `μ` is nonincreasing on `[0, ∞)`; lets the simulator use
    /// `μ(t)` itself as the forward envelope.
    pub nonincreasing: bool,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Exponential { alpha, beta } => f
                .debug_struct("Exponential")
                .field("alpha", alpha)
                .field("beta", beta)
                .finish(),
            Kernel::Custom(c) => f
                .debug_struct("Custom")
                .field("l1_norm", &c.l1_norm)
                .field("sup_norm", &c.sup_norm)
                .field("sup_derivative", &c.sup_derivative)
                .finish_non_exhaustive(),
        }
    }
}

impl Kernel {
    pub fn exponential(alpha: f64, beta: f64) -> Self {
        Kernel::Exponential { alpha, beta }
    }

    /// `μ(t)`, zero for `t < 0`.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Kernel::Exponential { alpha, beta } => alpha * (-beta * t).exp(),
            Kernel::Custom(c) => (c.value)(t),
        }
    }

    /// `μ′(t)` for `t ≥ 0`.
    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Kernel::Exponential { alpha, beta } => -beta * alpha * (-beta * t).exp(),
            Kernel::Custom(c) => (c.derivative)(t),
        }
    }

    /// `μ̂(t) = ∫₀ᵗ μ`.
    #[inline]
    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Kernel::Exponential { alpha, beta } => -alpha / beta * (-beta * t).exp_m1(),
            Kernel::Custom(c) => (c.integral)(t),
        }
    }

    pub fn l1_norm(&self) -> f64 {
        match self {
            Kernel::Exponential { alpha, beta } => alpha / beta,
            Kernel::Custom(c) => c.l1_norm,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Kernel::Exponential { alpha, .. } => alpha.abs(),
            Kernel::Custom(c) => c.sup_norm,
        }
    }

    pub fn sup_derivative(&self) -> f64 {
        match self {
            Kernel::Exponential { alpha, beta } => (alpha * beta).abs(),
            Kernel::Custom(c) => c.sup_derivative,
        }
    }

    /// `∫_from^∞ μ`.
    pub fn tail_mass(&self, from: f64) -> f64 {
        let from = from.max(0.0);
        match self {
            Kernel::Exponential { alpha, beta } => alpha / beta * (-beta * from).exp(),
            Kernel::Custom(c) => (c.l1_norm - (c.integral)(from)).max(0.0),
        }
    }

    /// An upper bound on `sup_{v ≥ t} μ(v)`.
    #[inline]
    pub fn forward_envelope(&self, t: f64) -> f64 {
        match self {
            Kernel::Exponential { .. } => self.value(t.max(0.0)),
            Kernel::Custom(c) if c.nonincreasing => self.value(t.max(0.0)),
            Kernel::Custom(c) => c.sup_norm,
        }
    }

    fn well_formed(&self) -> bool {
        match self {
            Kernel::Exponential { alpha, beta } => {
                alpha.is_finite() && *alpha >= 0.0 && beta.is_finite() && *beta > 0.0
            }
            Kernel::Custom(c) => {
                let grid_ok = (0..=2000).all(|k| {
                    let t = k as f64 * 0.01;
                    let v = (c.value)(t);
                    v.is_finite() && v >= 0.0 && (c.derivative)(t).is_finite()
                });
                grid_ok
                    && c.l1_norm.is_finite()
                    && c.l1_norm >= 0.0
                    && c.sup_norm.is_finite()
                    && c.sup_derivative.is_finite()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Nonlinearity
// ---------------------------------------------------------------------------

/// Link function `γ` applied to the excitation sum.
#[derive(Clone)]
pub enum Nonlinearity {
    /// `γ(x) = x`.
    Linear,
    /// `γ(x) = c · tanh(x / c)`.
    SaturatingTanh {
        cap: f64,
    },
    Custom(CustomNonlinearity),
}

#[derive(Clone)]
pub struct CustomNonlinearity {
    pub value: ScalarFn,
    pub derivative: ScalarFn,
    /// `a = sup |γ′|`.
    pub lipschitz: f64,
    pub nondecreasing: bool,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::Linear => f.write_str("Linear"),
            Nonlinearity::SaturatingTanh { cap } => {
                f.debug_struct("SaturatingTanh").field("cap", cap).finish()
            }
            Nonlinearity::Custom(c) => f
                .debug_struct("Custom")
                .field("lipschitz", &c.lipschitz)
                .field("nondecreasing", &c.nondecreasing)
                .finish_non_exhaustive(),
        }
    }
}

impl Nonlinearity {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Nonlinearity::Linear => x,
            Nonlinearity::SaturatingTanh { cap } => cap * (x / cap).tanh(),
            Nonlinearity::Custom(c) => (c.value)(x),
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Nonlinearity::Linear => 1.0,
            Nonlinearity::SaturatingTanh { cap } => {
                let th = (x / cap).tanh();
                1.0 - th * th
            }
            Nonlinearity::Custom(c) => (c.derivative)(x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Nonlinearity::Linear | Nonlinearity::SaturatingTanh { .. } => 1.0,
            Nonlinearity::Custom(c) => c.lipschitz,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Nonlinearity::Linear)
    }

    pub fn is_nondecreasing(&self) -> bool {
        match self {
            Nonlinearity::Linear | Nonlinearity::SaturatingTanh { .. } => true,
            Nonlinearity::Custom(c) => c.nondecreasing,
        }
    }

    fn well_formed(&self) -> bool {
        match self {
            Nonlinearity::SaturatingTanh { cap } => cap.is_finite() && *cap > 0.0,
            Nonlinearity::Custom(c) => c.lipschitz.is_finite(),
            Nonlinearity::Linear => true,
        }
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Per-clause outcome of the admissibility check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// `λ_* > 0`.
    pub baseline_positive: bool,
    /// `μ ≥ 0`, C¹ with bounded derivative, integrable.
    pub kernel_regular: bool,
    /// `γ(0) = 0` and `γ ≥ 0` on `ℝ₊`.
    pub gamma_vanishes_at_zero: bool,
    /// `a ‖μ‖₁ < 1`.
    pub stable: bool,
    /// `1 − a ‖μ‖₁`.
    pub margin: f64,
    pub baseline_lower_bound: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.baseline_positive && self.kernel_regular && self.gamma_vanishes_at_zero && self.stable
    }

    /// Names of the failing clauses.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.baseline_positive {
            out.push("baseline lower bound must be positive");
        }
        if !self.kernel_regular {
            out.push("kernel must be nonnegative, C1 with bounded derivative and integrable");
        }
        if !self.gamma_vanishes_at_zero {
            out.push("nonlinearity must satisfy gamma(0) = 0 and gamma >= 0 on R+");
        }
        if !self.stable {
            out.push("stability requires a * ||mu||_1 < 1");
        }
        out
    }
}

/// A nonlinear Hawkes model. Immutable once built.
#[derive(Debug, Clone)]
pub struct HawkesModel {
    pub baseline: Baseline,
    pub kernel: Kernel,
    pub nonlinearity: Nonlinearity,
}

impl HawkesModel {
    /// Builds a model, rejecting it if any admissibility clause fails.
    pub fn new(baseline: Baseline, kernel: Kernel, nonlinearity: Nonlinearity) -> Result<Self> {
        let model = Self::new_unchecked(baseline, kernel, nonlinearity);
        let report = model.validate();
        if report.passed() {
            Ok(model)
        } else {
            Err(Error::Assumption(report.failures().join("; ")))
        }
    }

    /// Builds a model without checking it; see [`validate_assumptions`].
    pub fn new_unchecked(baseline: Baseline, kernel: Kernel, nonlinearity: Nonlinearity) -> Self {
        Self {
            baseline,
            kernel,
            nonlinearity,
        }
    }

    /// Constant baseline, exponential kernel, linear link.
    pub fn linear_exponential(rate: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(
            Baseline::Constant { rate },
            Kernel::exponential(alpha, beta),
            Nonlinearity::Linear,
        )
    }

    pub fn validate(&self) -> ValidationReport {
        validate_assumptions(self)
    }

    /// `a ‖μ‖₁`.
    pub fn stability_ratio(&self) -> f64 {
        self.nonlinearity.lipschitz() * self.kernel.l1_norm()
    }

    pub fn lipschitz(&self) -> f64 {
        self.nonlinearity.lipschitz()
    }

    /// `Σ_{t_i < s} μ(s − t_i)` for sorted `jump_times`.
    #[inline]
    pub fn excitation(&self, jump_times: &[f64], s: f64) -> f64 {
        let mut acc = 0.0;
        for &t in jump_times {
            if t >= s {
                break;
            }
            acc += self.kernel.value(s - t);
        }
        acc
    }

    /// `Σ_{t_i ≤ s} μ(s − t_i)`: the right limit of the excitation at `s`.
    pub fn excitation_right(&self, jump_times: &[f64], s: f64) -> f64 {
        let mut acc = 0.0;
        for &t in jump_times {
            if t > s {
                break;
            }
            acc += self.kernel.value(s - t);
        }
        acc
    }

    /// Conditional intensity with only strictly earlier jumps contributing.
    pub fn intensity(&self, jump_times: &[f64], s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return input(format!("intensity evaluated at negative time {s}"));
        }
        check_sorted(jump_times)?;
        Ok(self.intensity_unchecked(jump_times, s))
    }

    /// [`HawkesModel::intensity`] without input checks; `jump_times` must be sorted.
    #[inline]
    pub fn intensity_unchecked(&self, jump_times: &[f64], s: f64) -> f64 {
        let value =
            self.baseline.value(s) + self.nonlinearity.value(self.excitation(jump_times, s));
        debug_assert!(
            value >= self.baseline.lower_bound() - 1e-12,
            "intensity {value} below baseline lower bound at s = {s}"
        );
        value
    }

    /// Right limit of the intensity at `s` (jumps at `s` included).
    pub fn intensity_right(&self, jump_times: &[f64], s: f64) -> f64 {
        self.baseline.value(s)
            + self
                .nonlinearity
                .value(self.excitation_right(jump_times, s))
    }

    /// `∫_from^∞ μ = ‖μ‖₁ − μ̂(from)`.
    pub fn kernel_tail_mass(&self, from: f64) -> Result<f64> {
        if !(from >= 0.0) {
            return input(format!("tail mass requested from negative time {from}"));
        }
        Ok(self.kernel.tail_mass(from))
    }
}

/// Checks every admissibility clause and reports the stability margin.
pub fn validate_assumptions(model: &HawkesModel) -> ValidationReport {
    let lower = model.baseline.lower_bound();
    let baseline_positive = model.baseline.well_formed() && lower > 0.0;
    let kernel_regular = model.kernel.well_formed();
    let gamma = &model.nonlinearity;
    let gamma_vanishes_at_zero = gamma.well_formed()
        && gamma.value(0.0).abs() <= 1e-14
        && (0..=1000).all(|k| gamma.value(k as f64 * 0.05) >= 0.0);
    let ratio = model.stability_ratio();
    ValidationReport {
        baseline_positive,
        kernel_regular,
        gamma_vanishes_at_zero,
        stable: ratio.is_finite() && ratio < 1.0,
        margin: 1.0 - ratio,
        baseline_lower_bound: lower,
    }
}

pub(crate) fn check_sorted(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return input("jump times must be finite");
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return input("jump times must be strictly increasing");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> HawkesModel {
        HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn reference_model_passes_with_half_margin() {
        let report = reference().validate();
        assert!(report.passed());
        assert!((report.margin - 0.5).abs() < 1e-15);
    }

    #[test]
    fn explosive_kernel_rejected() {
        let m = HawkesModel::new_unchecked(
            Baseline::Constant { rate: 1.0 },
            Kernel::exponential(2.0, 1.0),
            Nonlinearity::Linear,
        );
        let report = validate_assumptions(&m);
        assert!(!report.stable);
        assert!((report.margin + 1.0).abs() < 1e-15);
        assert!(HawkesModel::linear_exponential(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn gamma_offset_rejected() {
        let gamma = Nonlinearity::Custom(CustomNonlinearity {
            value: Arc::new(|x| x + 0.1),
            derivative: Arc::new(|_| 1.0),
            lipschitz: 1.0,
            nondecreasing: true,
        });
        let m = HawkesModel::new_unchecked(
            Baseline::Constant { rate: 1.0 },
            Kernel::exponential(0.5, 1.0),
            gamma,
        );
        let report = validate_assumptions(&m);
        assert!(!report.gamma_vanishes_at_zero);
        assert!(report.stable && report.baseline_positive && report.kernel_regular);
    }

    #[test]
    fn intensity_examples() {
        let m = reference();
        assert_eq!(m.intensity(&[], 3.3).unwrap(), 1.0);
        let v = m.intensity(&[1.0], 2.0).unwrap();
        assert!((v - (1.0 + 0.5 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 1.18394).abs() < 1e-5);
        assert_eq!(m.intensity(&[1.0], 0.5).unwrap(), 1.0);
        // Left-limit convention at the jump itself.
        assert_eq!(m.intensity(&[1.0], 1.0).unwrap(), 1.0);
        assert!(m.intensity(&[2.0, 1.0], 3.0).is_err());
        assert!(m.intensity(&[1.0], -0.1).is_err());
    }

    #[test]
    fn tail_mass_examples() {
        let m = reference();
        assert!((m.kernel_tail_mass(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(m.kernel_tail_mass(1e6).unwrap() < 1e-300);
        let v = m.kernel_tail_mass(1.0).unwrap();
        assert!((v - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.18394).abs() < 1e-5);
    }

    #[test]
    fn exponential_identities_on_grid() {
        let k = Kernel::exponential(0.7, 1.3);
        for i in 0..=1000 {
            let t = i as f64 * 0.01;
            let mu = k.value(t);
            assert!((k.derivative(t) + 1.3 * mu).abs() <= 1e-12 * mu.abs().max(1e-300));
            let closed = 0.7 / 1.3 * (1.0 - (-1.3 * t).exp());
            assert!((k.integral(t) - closed).abs() <= 1e-12 * closed.max(1e-300) + 1e-16);
        }
        assert!((k.l1_norm() - 0.7 / 1.3).abs() < 1e-15);
    }

    #[test]
    fn jump_in_intensity_at_event() {
        let m = HawkesModel::new(
            Baseline::Constant { rate: 1.0 },
            Kernel::exponential(0.5, 1.0),
            Nonlinearity::SaturatingTanh { cap: 0.6 },
        )
        .unwrap();
        let jumps = [0.4, 1.0, 1.7];
        let s = 1.0;
        let pre = m.excitation(&jumps, s);
        let left = m.intensity_unchecked(&jumps, s);
        let right = m.intensity_right(&jumps, s);
        let expected = m.nonlinearity.value(pre + 0.5) - m.nonlinearity.value(pre);
        assert!(expected >= 0.0);
        assert!((right - left - expected).abs() < 1e-15);
    }

    #[test]
    fn baseline_bounds() {
        let b = Baseline::Sinusoidal {
            level: 1.0,
            amplitude: 0.5,
            period: 2.0,
        };
        assert!((b.lower_bound() - 0.5).abs() < 1e-15);
        let ub = b.upper_bound(5.0);
        assert!(ub >= 1.5);
        for i in 0..1000 {
            assert!(b.value(i as f64 * 0.005) <= ub);
        }
        // integral consistency with finite differences of the antiderivative
        let h = 1e-6;
        for t in [0.3, 1.1, 4.2] {
            let fd = (b.integral(t + h) - b.integral(t - h)) / (2.0 * h);
            assert!((fd - b.value(t)).abs() < 1e-8);
            let fd2 = (b.value(t + h) - b.value(t - h)) / (2.0 * h);
            assert!((fd2 - b.derivative(t)).abs() < 1e-7);
        }
        let decreasing = Baseline::Affine {
            intercept: 1.0,
            slope: -0.1,
        };
        let m = HawkesModel::new_unchecked(
            decreasing,
            Kernel::exponential(0.1, 1.0),
            Nonlinearity::Linear,
        );
        assert!(!m.validate().baseline_positive);
    }
}
