//! Per-jump ingredients of the integration-by-parts weight.
//!
//! For a direction with antiderivative `m̂`, the weight is
//! `δ(m) = Σ_j [ψ(m, T_j) + m̂(T_j)(Γ₁ + Γ₂)(T_j) + m(T_j)]` where `ψ` carries the
//! log-derivative of the intensity at each jump and `Γ₁ + Γ₂` is minus the
//! derivative of the compensator `∫₀ᵀ λ*` with respect to that jump time.

use std::io::Write;

use crate::error::Result;
use crate::model::HawkesModel;
use crate::numeric::{adaptive_simpson, pairwise_sum};
use crate::simulate::HawkesPath;

use super::direction::CameronMartin;

/// Absolute tolerance for the `Γ₂` integral.
pub const GAMMA2_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTerms {
    pub jump_times: Vec<f64>,
    pub psi: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub m: Vec<f64>,
    pub m_hat: Vec<f64>,
}

impl WeightTerms {
    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// Per-jump summands of the divergence.
    pub fn summands(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.psi[j] + self.m_hat[j] * (self.gamma1[j] + self.gamma2[j]) + self.m[j])
            .collect()
    }

    /// `δ`, summed in a fixed order.
    pub fn divergence(&self) -> f64 {
        pairwise_sum(&self.summands())
    }
}

/// Weight terms of `path` in direction `m`.
pub fn weight_terms(model: &HawkesModel, path: &HawkesPath, m: &CameronMartin) -> WeightTerms {
    let times = path.jump_times();
    let m_at = times.iter().map(|&t| m.value(t)).collect();
    let m_hat_at = times.iter().map(|&t| m.antiderivative(t)).collect();
    weight_terms_from(model, path, m_at, m_hat_at)
}

/// Weight terms for any direction known only through its values at the jumps.
pub(crate) fn weight_terms_from(
    model: &HawkesModel,
    path: &HawkesPath,
    m_at: Vec<f64>,
    m_hat_at: Vec<f64>,
) -> WeightTerms {
    let times = path.jump_times();
    let (gamma1, gamma2) = link_terms(model, times, path.horizon());
    WeightTerms {
        jump_times: times.to_vec(),
        psi: psi_terms(model, times, &m_hat_at),
        gamma1,
        gamma2,
        m: m_at,
        m_hat: m_hat_at,
    }
}

/// `ψ(m, T_j)` for every jump, given `m̂` at the jumps.
pub(crate) fn psi_terms(model: &HawkesModel, times: &[f64], m_hat: &[f64]) -> Vec<f64> {
    let kernel = &model.kernel;
    let gamma = &model.nonlinearity;
    (0..times.len())
        .map(|j| {
            let tj = times[j];
            let mut excitation = 0.0;
            let mut cross = 0.0;
            for i in 0..j {
                let lag = tj - times[i];
                excitation += kernel.value(lag);
                cross += (m_hat[j] - m_hat[i]) * kernel.derivative(lag);
            }
            let intensity = model.baseline.value(tj) + gamma.value(excitation);
            (m_hat[j] * model.baseline.derivative(tj) + gamma.derivative(excitation) * cross)
                / intensity
        })
        .collect()
}

/// `(Γ₁, Γ₂)` at every jump of `times` on `[0, horizon]`.
///
/// `Γ₁(T_j) = γ(μ(0) + S_j) − γ(S_j)` with `S_j` the excitation just before
/// `T_j`, and `Γ₂(T_j) = ∫₀^{T−T_j} γ′(excitation at T_j + v) μ′(v) dv`.
pub(crate) fn link_terms(model: &HawkesModel, times: &[f64], horizon: f64) -> (Vec<f64>, Vec<f64>) {
    let kernel = &model.kernel;
    let gamma = &model.nonlinearity;
    let mu0 = kernel.value(0.0);
    if gamma.is_linear() {
        let g1 = vec![mu0; times.len()];
        let g2 = times
            .iter()
            .map(|&t| kernel.value(horizon - t) - mu0)
            .collect();
        return (g1, g2);
    }
    let mut g1 = Vec::with_capacity(times.len());
    let mut g2 = Vec::with_capacity(times.len());
    for (j, &tj) in times.iter().enumerate() {
        let before = model.excitation(times, tj);
        g1.push(gamma.value(mu0 + before) - gamma.value(before));

        // The integrand jumps at every later event; integrate piece by piece,
        // each piece seeing the events up to and including its left end.
        let pieces = times.len() - j;
        let tol = GAMMA2_TOL / pieces as f64;
        let mut total = 0.0;
        for k in j..times.len() {
            let a = times[k];
            let b = times.get(k + 1).copied().unwrap_or(horizon);
            let prefix = &times[..=k];
            let integrand = |u: f64| {
                let exc: f64 = prefix.iter().map(|&ti| kernel.value(u - ti)).sum();
                gamma.derivative(exc) * kernel.derivative(u - tj)
            };
            total += adaptive_simpson(integrand, a, b, tol);
        }
        g2.push(total);
    }
    (g1, g2)
}

/// Writes `(path_index, j, T_j, psi, gamma1, gamma2, m, m_hat)` rows, `j` 1-based.
pub fn write_weight_csv<'a, W, I>(rows: I, writer: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (u64, &'a WeightTerms)>,
{
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "path_index",
        "j",
        "T_j",
        "psi",
        "gamma1",
        "gamma2",
        "m",
        "m_hat",
    ])?;
    for (index, terms) in rows {
        for j in 0..terms.len() {
            out.write_record([
                index.to_string(),
                (j + 1).to_string(),
                terms.jump_times[j].to_string(),
                terms.psi[j].to_string(),
                terms.gamma1[j].to_string(),
                terms.gamma2[j].to_string(),
                terms.m[j].to_string(),
                terms.m_hat[j].to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Baseline, Kernel, Nonlinearity};
    use crate::simulate::integrated_intensity;

    fn path(times: &[f64]) -> HawkesPath {
        HawkesPath::new(5.0, times.to_vec()).unwrap()
    }

    #[test]
    fn linear_link_terms_sum_to_kernel_at_horizon() {
        let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
        let times = [0.4, 1.1, 1.15, 3.9, 4.99];
        let (g1, g2) = link_terms(&model, &times, 5.0);
        for (j, &t) in times.iter().enumerate() {
            let expected = 0.5 * (-(5.0 - t)).exp();
            assert!((g1[j] + g2[j] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_baseline_has_no_baseline_term_in_psi() {
        let model = HawkesModel::linear_exponential(1.0, 0.0, 1.0).unwrap();
        let m = CameronMartin::linear(5.0).unwrap();
        let w = weight_terms(&model, &path(&[1.0, 2.0, 3.0]), &m);
        assert!(w.psi.iter().all(|&p| p == 0.0));
        // Poisson reduction: δ(m) = Σ m(T_j).
        let expected = m.value(1.0) + m.value(2.0) + m.value(3.0);
        assert!((w.divergence() - expected).abs() < 1e-15);
    }

    #[test]
    fn saturating_link_terms_match_compensator_derivative() {
        let model = HawkesModel::new(
            Baseline::Constant { rate: 1.0 },
            Kernel::exponential(0.8, 1.0),
            Nonlinearity::SaturatingTanh { cap: 0.6 },
        )
        .unwrap();
        let times = vec![0.5, 0.9, 2.2, 2.4, 4.0];
        let (g1, g2) = link_terms(&model, &times, 5.0);
        for j in 0..times.len() {
            let h = 1e-6 * times[j].max(1.0);
            let mut up = times.clone();
            let mut down = times.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (integrated_intensity(&model, &up, 5.0)
                - integrated_intensity(&model, &down, 5.0))
                / (2.0 * h);
            let analytic = -(g1[j] + g2[j]);
            assert!(
                (fd - analytic).abs() <= 1e-4 * analytic.abs().max(1e-3),
                "jump {j}: fd {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn weight_csv_has_one_row_per_jump() {
        let model = HawkesModel::linear_exponential(1.0, 0.5, 1.0).unwrap();
        let m = CameronMartin::linear(5.0).unwrap();
        let w = weight_terms(&model, &path(&[1.0, 2.0]), &m);
        let mut buf = Vec::new();
        write_weight_csv([(7, &w)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("7,1,1,"));
    }
}
