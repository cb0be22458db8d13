//! Likelihood ratio of the reparametrized jump times.
//!
//! Under `Φ_ε(u) = u + ε m̂_ε(u)` the law of the path changes by
//! `Z = φ_n(Φ_ε(T)) / φ_n(T) · Π_i (1 + ε m_ε(T_i))` on `{N_T = n}`.

use crate::density::log_kappa;
use crate::error::{input, Result};
use crate::model::HawkesModel;
use crate::simulate::HawkesPath;

use super::direction::{CameronMartin, TruncatedDirection};

/// `log Z`; zero for `ε = 0`.
pub fn log_z_eps(
    model: &HawkesModel,
    path: &HawkesPath,
    m: &CameronMartin,
    eps: f64,
) -> Result<f64> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return input(format!(
            "perturbation size must be a nonnegative finite number, got {eps}"
        ));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    if let Some(sup) = m.sup_abs() {
        if eps * sup >= 1.0 / 3.0 {
            return input(format!(
                "eps * sup|m| = {} must stay below 1/3 for a bounded direction",
                eps * sup
            ));
        }
    }
    let direction = TruncatedDirection::new(m, eps);
    let times = path.jump_times();
    let horizon = path.horizon();
    let moved: Vec<f64> = times
        .iter()
        .map(|&t| t + eps * direction.antiderivative(t))
        .collect();
    let jacobian: f64 = times
        .iter()
        .map(|&t| (eps * direction.value(t)).ln_1p())
        .sum();
    let ratio = log_kappa(model, horizon, &moved) - log_kappa(model, horizon, times);
    Ok(ratio + jacobian)
}

/// `Z_n^ε` along `path`.
pub fn z_eps(model: &HawkesModel, path: &HawkesPath, m: &CameronMartin, eps: f64) -> Result<f64> {
    Ok(log_z_eps(model, path, m, eps)?.exp())
}

/// `Z_n^ε − 1`, computed without cancellation for small `ε`.
pub fn z_eps_minus_one(
    model: &HawkesModel,
    path: &HawkesPath,
    m: &CameronMartin,
    eps: f64,
) -> Result<f64> {
    Ok(log_z_eps(model, path, m, eps)?.exp_m1())
}
