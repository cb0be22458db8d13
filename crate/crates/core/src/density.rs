//! Jump-time densities on `{N_T = n}` and their validation against simulation.
//!
//! `κ(t) = 1{0<t₁<⋯<tₙ≤T} ∏ λ*(t_i; t₁..t_{i−1}) · exp(−∫₀ᵀ λ*(s; t₁..tₙ) ds)` and
//! the conditional density is `k_n = κ / P(N_T = n)`.

use std::io::Write;

use crate::error::{input, Error, Result};
use crate::model::HawkesModel;
use crate::numeric::GaussLegendre;
use crate::simulate::{integrated_intensity, PathBatch};
use crate::stats::{ks_test, TestOutcome};

/// Largest `n` handled by tensorized simplex quadrature.
pub const MAX_QUADRATURE_JUMPS: usize = 3;
/// Conditioned sample size required by [`density_vs_empirical`].
pub const MIN_CONDITIONED_SAMPLES: usize = 1_000;

/// Unnormalized log-density with its simplex flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEvaluation {
    pub log_kappa: f64,
    pub n: usize,
    pub in_simplex: bool,
}

/// Evaluates `log κ` at `times`; off the simplex the value is `-∞`.
pub fn evaluate_kappa(model: &HawkesModel, horizon: f64, times: &[f64]) -> DensityEvaluation {
    let n = times.len();
    let in_simplex = times.first().is_none_or(|&t| t > 0.0)
        && times.last().is_none_or(|&t| t <= horizon)
        && times.windows(2).all(|w| w[0] < w[1])
        && times.iter().all(|t| t.is_finite());
    if !in_simplex {
        return DensityEvaluation {
            log_kappa: f64::NEG_INFINITY,
            n,
            in_simplex,
        };
    }
    let mut log_prod = 0.0;
    for (i, &t) in times.iter().enumerate() {
        log_prod += model.intensity_unchecked(&times[..i], t).ln();
    }
    DensityEvaluation {
        log_kappa: log_prod - integrated_intensity(model, times, horizon),
        n,
        in_simplex,
    }
}

/// `log κ(times)`, `-∞` off the simplex.
pub fn log_kappa(model: &HawkesModel, horizon: f64, times: &[f64]) -> f64 {
    evaluate_kappa(model, horizon, times).log_kappa
}

/// How `P(N_T = n)` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationMethod {
    MonteCarlo,
    SimplexQuadrature,
}

/// Estimate of `P(N_T = n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub n: usize,
    pub value: f64,
    pub std_error: f64,
    pub method: NormalizationMethod,
}

impl Normalization {
    /// Empirical frequency of `{N_T = n}` in `batch`.
    pub fn monte_carlo(batch: &PathBatch, n: usize) -> Result<Self> {
        let total = batch.len();
        if total < 2 {
            return input("normalization needs at least 2 paths");
        }
        let hits = batch.paths.iter().filter(|p| p.count() == n).count();
        let p = hits as f64 / total as f64;
        Ok(Self {
            n,
            value: p,
            std_error: (p * (1.0 - p) / total as f64).sqrt(),
            method: NormalizationMethod::MonteCarlo,
        })
    }

    /// `∫ κ` over the simplex by an order-64 Gauss–Legendre rule per axis.
    pub fn quadrature(model: &HawkesModel, horizon: f64, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUADRATURE_JUMPS {
            return input(format!(
                "simplex quadrature supports 1 <= n <= {MAX_QUADRATURE_JUMPS}, got {n}"
            ));
        }
        Ok(Self {
            n,
            value: SimplexIntegrator::new(model, horizon, n).total(),
            std_error: 0.0,
            method: NormalizationMethod::SimplexQuadrature,
        })
    }

    fn check_reliable(&self) -> Result<()> {
        if self.method == NormalizationMethod::MonteCarlo
            && !(self.value >= 10.0 * self.std_error && self.value > 0.0)
        {
            return Err(Error::Refused(format!(
                "P(N_T = {}) estimate {} is below 10x its standard error {}",
                self.n, self.value, self.std_error
            )));
        }
        Ok(())
    }
}

/// `k_n(times) = κ(times) / P(N_T = n)`.
pub fn conditional_density_kn(
    model: &HawkesModel,
    horizon: f64,
    times: &[f64],
    normalization: &Normalization,
) -> Result<f64> {
    if times.is_empty() {
        return input("conditional density needs n >= 1");
    }
    if times.len() != normalization.n {
        return input(format!(
            "normalization is for n = {}, got {} times",
            normalization.n,
            times.len()
        ));
    }
    normalization.check_reliable()?;
    Ok(log_kappa(model, horizon, times).exp() / normalization.value)
}

/// `(λ^T + n a ‖μ‖∞)ⁿ / P(N_T = n)`, an upper bound on `k_n`.
pub fn density_upper_bound(model: &HawkesModel, horizon: f64, n: usize, probability: f64) -> f64 {
    let rate = model.baseline.upper_bound(horizon)
        + n as f64 * model.lipschitz() * model.kernel.sup_norm();
    rate.powi(n as i32) / probability
}

/// Nested Gauss–Legendre integration of `κ` over the ordered simplex,
/// optionally with one coordinate pinned (which yields a marginal density).
struct SimplexIntegrator<'a> {
    model: &'a HawkesModel,
    horizon: f64,
    n: usize,
    rule: &'static GaussLegendre,
}

impl<'a> SimplexIntegrator<'a> {
    fn new(model: &'a HawkesModel, horizon: f64, n: usize) -> Self {
        Self {
            model,
            horizon,
            n,
            rule: GaussLegendre::order64(),
        }
    }

    fn total(&self) -> f64 {
        let mut t = vec![0.0; self.n];
        self.nest(&mut t, 0, None)
    }

    /// Unnormalized marginal density of coordinate `k` (0-based) at `x`.
    fn marginal(&self, k: usize, x: f64) -> f64 {
        let mut t = vec![0.0; self.n];
        t[k] = x;
        self.nest(&mut t, 0, Some(k))
    }

    fn nest(&self, t: &mut Vec<f64>, p: usize, pinned: Option<usize>) -> f64 {
        if p == self.n {
            return log_kappa(self.model, self.horizon, t).exp();
        }
        if pinned == Some(p) {
            return self.nest(t, p + 1, pinned);
        }
        let lo = if p == 0 { 0.0 } else { t[p - 1] };
        let hi = match pinned {
            Some(k) if p < k => t[k],
            _ => self.horizon,
        };
        if hi <= lo {
            return 0.0;
        }
        let mut acc = 0.0;
        for (x, w) in self.rule.mapped(lo, hi) {
            t[p] = x;
            acc += w * self.nest(t, p + 1, pinned);
        }
        acc
    }
}

/// Tabulated CDF of one conditional marginal: cell integrals by an 8-point
/// Gauss rule and cubic Hermite interpolation inside cells.
pub struct MarginalCdf {
    horizon: f64,
    grid_density: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl MarginalCdf {
    fn build<F: Fn(f64) -> f64>(horizon: f64, cells: usize, density: F) -> Self {
        let rule = GaussLegendre::new(8);
        let h = horizon / cells as f64;
        let grid_density: Vec<f64> = (0..=cells).map(|i| density(i as f64 * h)).collect();
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            acc += rule.integrate(i as f64 * h, (i + 1) as f64 * h, &density);
            cumulative.push(acc);
        }
        Self {
            horizon,
            grid_density,
            cumulative,
            total: acc,
        }
    }

    /// Unnormalized mass, i.e. `P(N_T = n)` for the marginal's model.
    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.horizon {
            return 1.0;
        }
        let cells = self.grid_density.len() - 1;
        let h = self.horizon / cells as f64;
        let i = ((x / h) as usize).min(cells - 1);
        let s = (x - i as f64 * h) / h;
        // Hermite basis on the antiderivative with endpoint slopes = density.
        let (f0, f1) = (self.cumulative[i], self.cumulative[i + 1]);
        let (d0, d1) = (self.grid_density[i] * h, self.grid_density[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * f0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * f1
            + (s3 - s2) * d1;
        (v / self.total).clamp(0.0, 1.0)
    }
}

/// CDF of the `k`-th (0-based) jump time conditionally on `{N_T = n}`.
pub fn marginal_cdf(model: &HawkesModel, horizon: f64, n: usize, k: usize) -> Result<MarginalCdf> {
    if n == 0 || n > MAX_QUADRATURE_JUMPS || k >= n {
        return input(format!(
            "marginals are available for 1 <= n <= {MAX_QUADRATURE_JUMPS} and k < n"
        ));
    }
    let integrator = SimplexIntegrator::new(model, horizon, n);
    let cells = if n == 1 { 2048 } else { 256 };
    // The origin is excluded from the simplex; evaluate just inside it.
    Ok(MarginalCdf::build(horizon, cells, |x| {
        integrator.marginal(k, x.max(f64::MIN_POSITIVE))
    }))
}

/// One line of a density goodness-of-fit report.
#[derive(Debug, Clone, PartialEq)]
pub struct GofRow {
    pub n: usize,
    pub test_name: String,
    pub outcome: TestOutcome,
}

/// Kolmogorov–Smirnov tests of conditioned empirical jump times against the
/// quadrature marginals of `k_n` (one test per coordinate).
pub fn density_vs_empirical(
    model: &HawkesModel,
    horizon: f64,
    n: usize,
    batch: &PathBatch,
) -> Result<Vec<GofRow>> {
    let conditioned: Vec<&[f64]> = batch
        .paths
        .iter()
        .filter(|p| p.count() == n)
        .map(|p| p.jump_times())
        .collect();
    if conditioned.len() < MIN_CONDITIONED_SAMPLES {
        return Err(Error::Refused(format!(
            "only {} paths with N_T = {n}; need {MIN_CONDITIONED_SAMPLES}",
            conditioned.len()
        )));
    }
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let cdf = marginal_cdf(model, horizon, n, k)?;
        let samples: Vec<f64> = conditioned.iter().map(|t| t[k]).collect();
        let outcome = ks_test(&samples, |x| cdf.cdf(x))?;
        let test_name = if n == 1 {
            "ks_first_jump".to_string()
        } else {
            format!("ks_marginal_{}", k + 1)
        };
        rows.push(GofRow {
            n,
            test_name,
            outcome,
        });
    }
    Ok(rows)
}

/// Report CSV: `n,test_name,statistic,p_value,samples`.
pub fn write_gof_csv<W: Write>(rows: &[GofRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "test_name", "statistic", "p_value", "samples"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.test_name.clone(),
            r.outcome.statistic.to_string(),
            r.outcome.p_value.to_string(),
            r.outcome.samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
