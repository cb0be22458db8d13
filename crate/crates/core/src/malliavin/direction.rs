//! Cameron–Martin directions: zero-mean functions `m` on `[0, T]` with
//! antiderivative `m̂(t) = ∫₀ᵗ m`, so that `m̂(0) = m̂(T) = 0`.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{input, Result};
use crate::model::ScalarFn;
use crate::numeric::adaptive_simpson;

/// Tolerance on `|∫₀ᵀ m|` for user-supplied directions.
pub const ZERO_MEAN_TOL: f64 = 1e-10;

#[derive(Clone)]
pub enum DirectionKind {
    /// `m(t) = 1 − 2t/T`, `m̂(t) = t(1 − t/T)`.
    Linear,
    /// `√(2/T) cos(2πkt/T)`.
    Cosine(u32),
    /// `√(2/T) sin(2πkt/T)`.
    Sine(u32),
    Custom {
        value: ScalarFn,
        antiderivative: ScalarFn,
        /// `sup |m|`, or `None` when unbounded.
        sup_abs: Option<f64>,
    },
}

impl fmt::Debug for DirectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectionKind::Linear => f.write_str("Linear"),
            DirectionKind::Cosine(k) => write!(f, "Cosine({k})"),
            DirectionKind::Sine(k) => write!(f, "Sine({k})"),
            DirectionKind::Custom { sup_abs, .. } => f
                .debug_struct("Custom")
                .field("sup_abs", sup_abs)
                .finish_non_exhaustive(),
        }
    }
}

/// A direction `m` in the Cameron–Martin space over a fixed horizon.
#[derive(Debug, Clone)]
pub struct CameronMartin {
    horizon: f64,
    kind: DirectionKind,
}

impl CameronMartin {
    /// The default direction `m(t) = 1 − 2t/T`, whose antiderivative is
    /// positive on `(0, T)`.
    pub fn linear(horizon: f64) -> Result<Self> {
        Self::new(horizon, DirectionKind::Linear)
    }

    pub fn cosine(horizon: f64, k: u32) -> Result<Self> {
        if k == 0 {
            return input("cosine directions need k >= 1 to have zero mean");
        }
        Self::new(horizon, DirectionKind::Cosine(k))
    }

    pub fn sine(horizon: f64, k: u32) -> Result<Self> {
        if k == 0 {
            return input("sine directions need k >= 1");
        }
        Self::new(horizon, DirectionKind::Sine(k))
    }

    /// A user direction; the antiderivative must be exact and `∫₀ᵀ m` must
    /// vanish to within [`ZERO_MEAN_TOL`].
    pub fn custom(
        horizon: f64,
        value: ScalarFn,
        antiderivative: ScalarFn,
        sup_abs: Option<f64>,
    ) -> Result<Self> {
        let mean = adaptive_simpson(|t| value(t), 0.0, horizon, 1e-13);
        if mean.abs() > ZERO_MEAN_TOL {
            return input(format!("direction integrates to {mean}, not 0"));
        }
        if antiderivative(0.0).abs() > ZERO_MEAN_TOL
            || antiderivative(horizon).abs() > ZERO_MEAN_TOL
        {
            return input("direction antiderivative must vanish at 0 and T");
        }
        Self::new(
            horizon,
            DirectionKind::Custom {
                value,
                antiderivative,
                sup_abs,
            },
        )
    }

    fn new(horizon: f64, kind: DirectionKind) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return input(format!("horizon must be positive, got {horizon}"));
        }
        Ok(Self { horizon, kind })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kind(&self) -> &DirectionKind {
        &self.kind
    }

    /// `m(t)`.
    pub fn value(&self, t: f64) -> f64 {
        let h = self.horizon;
        match &self.kind {
            DirectionKind::Linear => 1.0 - 2.0 * t / h,
            DirectionKind::Cosine(k) => (2.0 / h).sqrt() * (TAU * *k as f64 * t / h).cos(),
            DirectionKind::Sine(k) => (2.0 / h).sqrt() * (TAU * *k as f64 * t / h).sin(),
            DirectionKind::Custom { value, .. } => value(t),
        }
    }

    /// `m̂(t) = ∫₀ᵗ m`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        let h = self.horizon;
        match &self.kind {
            DirectionKind::Linear => t * (1.0 - t / h),
            DirectionKind::Cosine(k) => {
                let w = TAU * *k as f64 / h;
                (2.0 / h).sqrt() / w * (w * t).sin()
            }
            DirectionKind::Sine(k) => {
                let w = TAU * *k as f64 / h;
                (2.0 / h).sqrt() / w * (1.0 - (w * t).cos())
            }
            DirectionKind::Custom { antiderivative, .. } => antiderivative(t),
        }
    }

    /// `sup |m|`, `None` when unbounded.
    pub fn sup_abs(&self) -> Option<f64> {
        match &self.kind {
            DirectionKind::Linear => Some(1.0),
            DirectionKind::Cosine(_) | DirectionKind::Sine(_) => Some((2.0 / self.horizon).sqrt()),
            DirectionKind::Custom { sup_abs, .. } => *sup_abs,
        }
    }

    /// `sup |m̂|`.
    pub fn sup_abs_antiderivative(&self) -> f64 {
        let h = self.horizon;
        match &self.kind {
            DirectionKind::Linear => h / 4.0,
            DirectionKind::Cosine(k) => (2.0 / h).sqrt() * h / (TAU * *k as f64),
            DirectionKind::Sine(k) => 2.0 * (2.0 / h).sqrt() * h / (TAU * *k as f64),
            DirectionKind::Custom { antiderivative, .. } => (0..=10_000)
                .map(|i| antiderivative(h * i as f64 / 10_000.0).abs())
                .fold(0.0, f64::max),
        }
    }

    /// `‖m‖²_{L²}`.
    pub fn l2_norm_sq(&self) -> f64 {
        match &self.kind {
            DirectionKind::Linear => self.horizon / 3.0,
            DirectionKind::Cosine(_) | DirectionKind::Sine(_) => 1.0,
            DirectionKind::Custom { value, .. } => {
                adaptive_simpson(|t| value(t).powi(2), 0.0, self.horizon, 1e-12)
            }
        }
    }
}

/// The direction actually used for a perturbation of size `ε`: `m` itself when
/// `ε sup|m| < 1/3`, otherwise `m` clamped to `±1/(3ε)` and re-centred.
pub(crate) struct TruncatedDirection<'a> {
    base: &'a CameronMartin,
    eps: f64,
    /// `∫₀ᵀ m̃_ε / T`, or `None` when no truncation is needed.
    shift: Option<f64>,
}

impl<'a> TruncatedDirection<'a> {
    pub(crate) fn new(base: &'a CameronMartin, eps: f64) -> Self {
        let needs_truncation = match base.sup_abs() {
            Some(s) => eps * s >= 1.0 / 3.0,
            None => true,
        };
        let shift = needs_truncation.then(|| {
            let cap = 1.0 / (3.0 * eps);
            adaptive_simpson(|t| base.value(t).clamp(-cap, cap), 0.0, base.horizon, 1e-12)
                / base.horizon
        });
        Self { base, eps, shift }
    }

    pub(crate) fn value(&self, t: f64) -> f64 {
        match self.shift {
            None => self.base.value(t),
            Some(c) => {
                let cap = 1.0 / (3.0 * self.eps);
                self.base.value(t).clamp(-cap, cap) - c
            }
        }
    }

    pub(crate) fn antiderivative(&self, t: f64) -> f64 {
        match self.shift {
            None => self.base.antiderivative(t),
            Some(c) => {
                let cap = 1.0 / (3.0 * self.eps);
                adaptive_simpson(|s| self.base.value(s).clamp(-cap, cap), 0.0, t, 1e-12) - c * t
            }
        }
    }
}
