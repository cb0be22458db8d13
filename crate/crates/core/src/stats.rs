//! Monte Carlo estimators and goodness-of-fit statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Sample mean with its standard error and effective sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub ess: f64,
}

impl McEstimate {
    /// z-score of the estimate against `reference`, treating `extra_se` as
    /// independent error in the reference.
    pub fn z_against(&self, reference: f64, extra_se: f64) -> f64 {
        let se = (self.std_error.powi(2) + extra_se.powi(2)).sqrt();
        z_score(self.mean - reference, se)
    }
}

/// Difference over standard error, with 0/0 mapped to 0.
pub fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Mean, standard error and sample size of an index-ordered stream.
///
/// Sums are pairwise over the slice order, so the result is a pure function of
/// the values in path-index order.
pub fn mc_estimate(values: &[f64]) -> Result<McEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 samples, got {n}")));
    }
    let mean = pairwise_sum(values) / n as f64;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        n,
        ess: n as f64,
    })
}

/// Like [`mc_estimate`], reporting the effective sample size
/// `(Σw)² / Σw²` of the weights that multiply the payoff.
pub fn mc_estimate_weighted(values: &[f64], weights: &[f64]) -> Result<McEstimate> {
    if values.len() != weights.len() {
        return Err(Error::Input("values and weights differ in length".into()));
    }
    let mut est = mc_estimate(values)?;
    let sw = pairwise_sum(weights);
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let sw2 = pairwise_sum(&sq);
    est.ess = if sw2 > 0.0 {
        (sw * sw / sw2).min(values.len() as f64)
    } else {
        0.0
    };
    Ok(est)
}

/// Result of a goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
}

/// One-sample Kolmogorov–Smirnov test of `samples` against `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<TestOutcome> {
    if samples.is_empty() {
        return Err(Error::Input("KS test needs at least one sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
    Ok(TestOutcome {
        statistic: d,
        p_value,
        samples: sorted.len(),
    })
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Small-x series (Jacobi theta form) converges faster here.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let c = (2.0 * std::f64::consts::PI).sqrt() / x;
        let cdf = c * (y + y.powi(9) + y.powi(25) + y.powi(49));
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson chi-square test of integer counts against Poisson(`mean`).
///
/// Cells are `0..=k_max` plus an upper tail; `k_max` is the largest count whose
/// expected frequency stays at least 5, and the lower cells are pooled the
/// same way.
pub fn poisson_chi_square(counts: &[usize], mean: f64) -> Result<TestOutcome> {
    if counts.is_empty() || mean <= 0.0 {
        return Err(Error::Input(
            "chi-square needs samples and a positive mean".into(),
        ));
    }
    let n = counts.len() as f64;
    let dist = Poisson::new(mean).map_err(|e| Error::Input(e.to_string()))?;
    let max_seen = *counts.iter().max().unwrap_or(&0);
    let upper = max_seen.max((mean * 4.0) as usize + 10);
    let mut observed = vec![0f64; upper + 1];
    for &c in counts {
        observed[c] += 1.0;
    }
    let probs: Vec<f64> = (0..=upper as u64).map(|k| dist.pmf(k)).collect();

    // Greedy pooling into cells with expected count >= 5.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for k in 0..=upper {
        o += observed[k];
        e += probs[k] * n;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    // Remaining tail mass including everything beyond `upper`.
    let covered: f64 = probs.iter().sum();
    e += (1.0 - covered).max(0.0) * n;
    if let Some(last) = cells.last_mut() {
        last.0 += o;
        last.1 += e;
    } else {
        cells.push((o, e));
    }
    if cells.len() < 2 {
        return Err(Error::Input("too few cells for a chi-square test".into()));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (cells.len() - 1) as f64;
    let chi = ChiSquared::new(df).map_err(|e| Error::Input(e.to_string()))?;
    Ok(TestOutcome {
        statistic: stat,
        p_value: 1.0 - chi.cdf(stat),
        samples: counts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stream() {
        let est = mc_estimate(&[3.5; 10]).unwrap();
        assert_eq!(est.mean, 3.5);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.ess, 10.0);
    }

    #[test]
    fn alternating_stream_standard_error() {
        // Hand computation: mean 0, sample variance n/(n-1), SE = sqrt(1/(n-1)).
        let n = 1000;
        let v: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let est = mc_estimate(&v).unwrap();
        assert_eq!(est.mean, 0.0);
        assert!((est.std_error - (1.0 / (n as f64 - 1.0)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        assert!(mc_estimate(&[1.0]).is_err());
    }

    #[test]
    fn weighted_ess_bounded_by_n() {
        let w = [1.0, -2.0, 0.5, 3.0];
        let est = mc_estimate_weighted(&[1.0, 2.0, 3.0, 4.0], &w).unwrap();
        assert!(est.ess <= 4.0);
        let flat = mc_estimate_weighted(&[1.0, 2.0], &[1.0, 1.0]).unwrap();
        assert!((flat.ess - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // The two series must meet continuously at the switch point.
        let a = kolmogorov_survival(1.18 - 1e-9);
        let b = kolmogorov_survival(1.18 + 1e-9);
        assert!((a - b).abs() < 1e-6);
        // Known quantile: P(K > 1.358) ~ 0.05.
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn ks_detects_uniform() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let out = ks_test(&v, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(out.statistic <= 0.0005 + 1e-12);
        assert!(out.p_value > 0.99);
        let bad = ks_test(&v, |x| (x * x).clamp(0.0, 1.0)).unwrap();
        assert!(bad.p_value < 1e-6);
    }
}
