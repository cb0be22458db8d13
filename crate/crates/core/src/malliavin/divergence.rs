//! The divergence `δ` on deterministic directions, predictable step processes
//! and products `m·A` with a smooth functional `A`.

use crate::error::{input, Result};
use crate::model::HawkesModel;
use crate::simulate::HawkesPath;

use super::direction::CameronMartin;
use super::functional::{grad_smooth, SmoothFunctional};
use super::weights::{weight_terms, weight_terms_from};

/// Tolerance on `|∫₀ᵀ u|` for step processes.
pub const STEP_MEAN_TOL: f64 = 1e-9;

/// `δ(m) = Σ_j [ψ(m, T_j) + m̂(T_j)(Γ₁ + Γ₂)(T_j) + m(T_j)]`.
pub fn divergence_m(model: &HawkesModel, path: &HawkesPath, m: &CameronMartin) -> f64 {
    weight_terms(model, path, m).divergence()
}

/// A left-continuous step function on `[0, T]`: `values[k]` on
/// `(edges[k], edges[k+1]]`, with `edges[0] = 0` and `edges.last() = T`.
///
/// Predictability is the caller's responsibility: the value on a cell may only
/// depend on jumps strictly before the cell's left edge.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProcess {
    edges: Vec<f64>,
    values: Vec<f64>,
}

impl StepProcess {
    pub fn new(edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || values.len() + 1 != edges.len() {
            return input("a step process needs k+1 edges for k values");
        }
        if edges[0] != 0.0 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return input("step edges must start at 0 and increase strictly");
        }
        Ok(Self { edges, values })
    }

    pub fn zero(horizon: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![0.0])
    }

    pub fn horizon(&self) -> f64 {
        *self.edges.last().expect("at least two edges")
    }

    pub fn value(&self, t: f64) -> f64 {
        // First cell whose right edge is ≥ t; t = 0 belongs to the first cell.
        let k = self.edges[1..].partition_point(|&e| e < t);
        self.values[k.min(self.values.len() - 1)]
    }

    /// `û(t) = ∫₀ᵗ u`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            let (a, b) = (self.edges[k], self.edges[k + 1]);
            if t <= a {
                break;
            }
            acc += v * (b.min(t) - a);
        }
        acc
    }
}

/// `δ(u) = Σ_j [ψ(u, T_j) + û(T_j)(Γ₁ + Γ₂)(T_j) + u(T_j)]` for a predictable
/// step process with `∫₀ᵀ u = 0` on this path.
pub fn divergence_predictable(
    model: &HawkesModel,
    path: &HawkesPath,
    u: &StepProcess,
) -> Result<f64> {
    if (u.horizon() - path.horizon()).abs() > 1e-12 * path.horizon() {
        return input("step process and path have different horizons");
    }
    let total = u.antiderivative(u.horizon());
    if total.abs() > STEP_MEAN_TOL {
        return input(format!("step process integrates to {total}, not 0"));
    }
    let times = path.jump_times();
    let u_at = times.iter().map(|&t| u.value(t)).collect();
    let u_hat_at = times.iter().map(|&t| u.antiderivative(t)).collect();
    Ok(weight_terms_from(model, path, u_at, u_hat_at).divergence())
}

/// `δ(m A) = A δ(m) − D_m A`.
pub fn divergence_scaled(
    model: &HawkesModel,
    path: &HawkesPath,
    m: &CameronMartin,
    a: &dyn SmoothFunctional,
) -> Result<f64> {
    let value = a.value(path.jump_times(), path.horizon()).ok_or_else(|| {
        crate::error::Error::Input(format!("{} undefined on this path", a.label()))
    })?;
    let d_m_a = grad_smooth(a, path)?.directional(m);
    Ok(value * divergence_m(model, path, m) - d_m_a)
}
